#include "vaporqm/errors.hpp"
#include "vaporqm/scenario.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

using namespace vqm;
using nlohmann::json;

namespace {

json minimal()
{
    return json::parse(R"({
        "cell": { "temperature_k": 363.15 },
        "analysis": { "quiet_region": { "start_s": 16.2e-9, "width_s": 48.6e-9 } }
    })");
}

std::string error_of(const json& j)
{
    try {
        resolve_scenario(j);
    } catch (const ValidationError& e) {
        return e.what();
    }
    return {};
}

} // namespace

TEST_CASE("bundled scenario loads and round-trips")
{
    const auto cfg = load_scenario(bundled_scenario("paper-operating-point"));
    CHECK(cfg.name == "paper-operating-point");
    CHECK(cfg.atom.field_tesla == 1.06);
    CHECK(cfg.filters.etalons.size() == 4);
    const auto path = std::filesystem::temp_directory_path() / "vqm_roundtrip.json";
    save_scenario(cfg, path);
    const auto back = load_scenario(path);
    CHECK(back == cfg);
    CHECK(back.to_json() == cfg.to_json());
    std::filesystem::remove(path);
}

TEST_CASE("defaults are filled and their provenance recorded")
{
    const auto cfg = resolve_scenario(minimal());
    CHECK(cfg.populations.polarization_in_g == 0.88);
    CHECK(cfg.provenance["populations.polarization_in_g"] == "default");
    CHECK(cfg.provenance["cell.temperature_k"] == "config");
    CHECK(cfg.analysis.bin_width_s == 540e-12);
    CHECK_FALSE(cfg.memory.excited_decay_rad_s.has_value());
}

TEST_CASE("schema violations name the offending field")
{
    json j = minimal();
    j["cell"].erase("temperature_k");
    CHECK(error_of(j).find("cell.temperature_k") != std::string::npos);

    j = minimal();
    j["cell"]["enrichment"] = 1.2;
    CHECK(error_of(j).find("cell.enrichment") != std::string::npos);

    j = minimal();
    j["cell"]["colour"] = "blue";
    CHECK(error_of(j).find("cell.colour") != std::string::npos);

    j = minimal();
    j["analysis"].erase("quiet_region");
    CHECK(error_of(j).find("analysis.quiet_region") != std::string::npos);

    j = minimal();
    j["memory"]["retrieval"] = "sideways";
    CHECK(error_of(j).find("memory.retrieval") != std::string::npos);

    j = minimal();
    j["filters"]["etalons"] = json::array({{{"fsr_hz", 71.1e9}}});
    CHECK(error_of(j).find("filters.etalons[0].fwhm_hz") != std::string::npos);

    j = minimal();
    j["filters"]["etalons"] = json::array({{{"fsr_hz", 1e9}, {"fwhm_hz", 2e9}}});
    CHECK_FALSE(error_of(j).empty());

    j = minimal();
    j["memory"]["z_points"] = 10.5;
    CHECK(error_of(j).find("memory.z_points") != std::string::npos);

    j = minimal();
    j["pulses"]["signal"]["source"] = "file";
    CHECK(error_of(j).find("pulses.signal.path") != std::string::npos);
}

TEST_CASE("malformed files are validation errors")
{
    const auto path = std::filesystem::temp_directory_path() / "vqm_bad.json";
    std::ofstream(path) << "{ \"cell\": ";
    CHECK_THROWS_AS(load_scenario(path), ValidationError);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.json"), ValidationError);
}
