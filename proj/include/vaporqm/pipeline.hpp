#pragma once

#include "vaporqm/scenario.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace vqm {

enum class Stage { spectrum, memory, filters, tags, analysis };

std::string_view to_string(Stage stage);
/// Comma-separated stage names, or "all".
std::vector<Stage> parse_stages(std::string_view list);
/// Add upstream stages and sort into pipeline order.
std::vector<Stage> with_dependencies(std::vector<Stage> stages);
/// Stages a given stage consumes outputs from.
std::vector<Stage> dependencies(Stage stage);

const char* toolkit_version();

/// Result of one pipeline run: a JSON document (resolved config, provenance,
/// per-stage outputs and status) plus CSV sidecars keyed by file name.
struct RunRecord {
    nlohmann::json document;
    std::map<std::string, std::string> sidecars;

    const std::string& content_hash() const;
    bool ok() const;
    /// "validation" or "numerical" for the first failed stage, empty when ok.
    std::string failure_kind() const;
    std::string failure_message() const;
};

/// SHA-256 over the document (timestamps and the hash itself excluded) and
/// every sidecar.
std::string compute_content_hash(const RunRecord& record);

/// Runs the requested stages in pipeline order. Each stage's dependencies must
/// be in the list. A failing stage is marked in the record and later stages
/// are skipped; the partial record is returned, never thrown away.
RunRecord run_pipeline(const ScenarioConfig& config, const std::vector<Stage>& stages);

/// record.json plus sidecars into `dir`.
void write_run_record(const RunRecord& record, const std::filesystem::path& dir);
RunRecord read_run_record(const std::filesystem::path& dir);

enum class ExportKind { histogram, lifetime, od_curve };
ExportKind parse_export_kind(std::string_view name);
std::string_view to_string(ExportKind kind);

/// Plot-ready CSV files plus manifest.json describing columns and units.
/// Returns the written paths.
std::vector<std::filesystem::path> export_plots(const RunRecord& record, ExportKind kind,
                                                const std::filesystem::path& dir);

} // namespace vqm
