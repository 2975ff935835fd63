#include "vaporqm/errors.hpp"
#include "vaporqm/pipeline.hpp"
#include "vaporqm/scenario.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

namespace {

enum ExitCode { ok = 0, internal = 1, validation = 2, numerical = 3 };

struct Globals {
    std::string scenario = "paper-operating-point";
    std::string out = "vqm-run";
    std::optional<std::uint64_t> seed;
    std::string stages = "all";
};

vqm::ScenarioConfig load(const Globals& g)
{
    std::filesystem::path path(g.scenario);
    if (!std::filesystem::exists(path) && path.extension().empty() && !path.has_parent_path())
        path = vqm::bundled_scenario(g.scenario);
    auto config = vqm::load_scenario(path);
    if (g.seed) {
        config.seeds.tags = *g.seed;
        config.seeds.lifetime = *g.seed + 1;
        config.provenance["seeds.tags"] = "cli";
        config.provenance["seeds.lifetime"] = "cli";
    }
    return config;
}

int run_stages(const Globals& g, const std::vector<vqm::Stage>& requested)
{
    const auto config = load(g);
    const auto record = vqm::run_pipeline(config, vqm::with_dependencies(requested));
    vqm::write_run_record(record, g.out);

    nlohmann::json summary{{"record", (std::filesystem::path(g.out) / "record.json").string()},
                           {"content_hash", record.content_hash()},
                           {"status", record.document.at("status")}};
    for (auto s : requested) {
        const std::string name(vqm::to_string(s));
        if (record.document.at("outputs").contains(name)) {
            auto out = record.document["outputs"][name];
            if (name == "analysis")
                out.erase("lifetime");
            summary["outputs"][name] = out;
        }
    }
    std::cout << summary.dump(2) << '\n';
    if (record.ok())
        return ok;
    std::cerr << "vqm: " << record.failure_message() << '\n';
    return record.failure_kind() == "numerical" ? numerical : validation;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Simulation and analysis toolkit for a high-field vapor-cell quantum memory"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", vqm::toolkit_version());

    Globals g;
    app.add_option("-s,--scenario", g.scenario, "Scenario file, or the name of a bundled scenario")
        ->capture_default_str();
    app.add_option("-o,--out", g.out, "Run directory for record.json and CSV sidecars")->capture_default_str();
    app.add_option("--seed", g.seed, "Override the scenario seeds");
    app.add_option("--stages", g.stages, "Stages for `run`: comma list of spectrum,memory,filters,tags,analysis or all")
        ->capture_default_str();

    const std::pair<const char*, vqm::Stage> verbs[] = {
        {"spectrum", vqm::Stage::spectrum}, {"memory", vqm::Stage::memory}, {"filters", vqm::Stage::filters},
        {"tags", vqm::Stage::tags},         {"analyze", vqm::Stage::analysis}};
    std::vector<std::pair<CLI::App*, vqm::Stage>> stage_cmds;
    for (const auto& [verb, stage] : verbs) {
        const std::string help = "Run the " + std::string(vqm::to_string(stage)) + " stage and its prerequisites";
        stage_cmds.emplace_back(app.add_subcommand(verb, help), stage);
    }
    auto* run = app.add_subcommand("run", "Run the pipeline (all stages unless --stages is given)");

    auto* exp = app.add_subcommand("export", "Write plot-ready CSV plus a manifest from a run record");
    std::string kind;
    std::string record_dir;
    exp->add_option("--kind", kind, "histogram, lifetime or od-curve")->required();
    exp->add_option("--record", record_dir, "Run directory holding record.json")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : validation;
    }

    try {
        for (const auto& [cmd, stage] : stage_cmds)
            if (cmd->parsed())
                return run_stages(g, {stage});
        if (run->parsed())
            return run_stages(g, vqm::parse_stages(g.stages));
        if (exp->parsed()) {
            const auto record = vqm::read_run_record(record_dir);
            for (const auto& p : vqm::export_plots(record, vqm::parse_export_kind(kind), g.out))
                std::cout << p.string() << '\n';
            return ok;
        }
    } catch (const vqm::ValidationError& e) {
        std::cerr << "vqm: " << e.what() << '\n';
        return validation;
    } catch (const vqm::NumericalError& e) {
        std::cerr << "vqm: " << e.what() << '\n';
        return numerical;
    } catch (const std::exception& e) {
        std::cerr << "vqm: " << e.what() << '\n';
        return internal;
    }
    return internal;
}
