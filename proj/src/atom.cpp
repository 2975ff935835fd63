#include "vaporqm/atom.hpp"

#include "vaporqm/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>

#ifndef VQM_DATA_DIR
#define VQM_DATA_DIR "data"
#endif

namespace vqm {

using nlohmann::json;

namespace {

const json& require(const json& node, const std::string& key, const std::string& path)
{
    auto it = node.find(key);
    if (it == node.end())
        throw ValidationError(path + "." + key + ": missing required field");
    return *it;
}

double number(const json& node, const std::string& key, const std::string& path)
{
    const json& v = require(node, key, path);
    if (!v.is_number())
        throw ValidationError(path + "." + key + ": expected a number");
    return v.get<double>();
}

int twice_half_integer(double value, const std::string& where)
{
    const double twice = 2.0 * value;
    if (value < 0.0 || std::abs(twice - std::round(twice)) > 1e-12)
        throw ValidationError(where + ": must be a non-negative half-integer");
    return static_cast<int>(std::lround(twice));
}

FineLevel parse_level(const json& node, const std::string& path)
{
    FineLevel level;
    level.two_j = twice_half_integer(number(node, "j", path), path + ".j");
    level.g_j = number(node, "g_j", path);
    level.hyperfine_a_hz = number(node, "hyperfine_a_hz", path);
    level.hyperfine_b_hz = node.value("hyperfine_b_hz", 0.0);
    return level;
}

VaporPressureBranch parse_branch(const json& node, const std::string& path)
{
    return {number(node, "a", path), number(node, "b", path), number(node, "c", path),
            number(node, "d", path)};
}

} // namespace

void validate(const AtomSpec& atom)
{
    auto finite = [](double v) { return std::isfinite(v); };
    if (atom.two_i < 0)
        throw ValidationError(atom.name + ": nuclear spin must be non-negative");
    if (!(atom.isotope_abundance >= 0.0 && atom.isotope_abundance <= 1.0))
        throw ValidationError(atom.name + ": isotope abundance must lie in [0, 1]");
    for (double v : {atom.ground.hyperfine_a_hz, atom.ground.hyperfine_b_hz,
                     atom.excited.hyperfine_a_hz, atom.excited.hyperfine_b_hz, atom.g_i,
                     atom.ground.g_j, atom.excited.g_j}) {
        if (!finite(v))
            throw ValidationError(atom.name + ": non-finite hyperfine or g-factor constant");
    }
    if (!(atom.natural_linewidth_rad_s > 0.0) || !finite(atom.natural_linewidth_rad_s))
        throw ValidationError(atom.name + ": natural linewidth must be positive and finite");
    if (!(atom.mass_kg > 0.0) || !(atom.transition_wavelength_m > 0.0))
        throw ValidationError(atom.name + ": mass and wavelength must be positive");
    if (atom.ground.two_j != 1 || (atom.excited.two_j != 1 && atom.excited.two_j != 3))
        throw ValidationError(atom.name + ": only J=1/2 ground and J=1/2 or 3/2 excited levels are supported");
    for (const auto& [gas, rate] : atom.buffer_broadening_hz_per_mbar) {
        if (!finite(rate) || rate < 0.0)
            throw ValidationError(atom.name + ": invalid buffer broadening for " + gas);
    }
}

AtomSpec load_atom(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open constants file " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }

    const std::string root = path.filename().string();
    AtomSpec atom;
    atom.name = require(doc, "name", root).get<std::string>();
    atom.version = require(doc, "version", root).get<std::string>();
    atom.line = doc.value("line", "D2");
    atom.two_i = twice_half_integer(number(doc, "nuclear_spin", root), root + ".nuclear_spin");
    atom.g_i = number(doc, "g_i", root);
    atom.mass_kg = number(doc, "mass_kg", root);
    atom.transition_wavelength_m = number(doc, "transition_wavelength_m", root);
    atom.transition_frequency_hz = number(doc, "transition_frequency_hz", root);
    atom.natural_linewidth_rad_s = number(doc, "natural_linewidth_rad_s", root);
    atom.isotope_abundance = number(doc, "natural_abundance", root);
    atom.ground = parse_level(require(doc, "ground", root), root + ".ground");
    atom.excited = parse_level(require(doc, "excited", root), root + ".excited");

    const json& vp = require(doc, "vapor_pressure", root);
    const std::string vp_path = root + ".vapor_pressure";
    atom.vapor.melting_point_k = number(vp, "melting_point_k", vp_path);
    atom.vapor.solid = parse_branch(require(vp, "solid", vp_path), vp_path + ".solid");
    atom.vapor.liquid = parse_branch(require(vp, "liquid", vp_path), vp_path + ".liquid");
    if (auto it = vp.find("valid_range_k"); it != vp.end()) {
        atom.vapor.min_temperature_k = it->at(0).get<double>();
        atom.vapor.max_temperature_k = it->at(1).get<double>();
    }

    if (auto it = doc.find("buffer_broadening_hz_per_mbar"); it != doc.end()) {
        for (const auto& [gas, rate] : it->items())
            atom.buffer_broadening_hz_per_mbar[gas] = rate.get<double>();
    }
    if (auto it = doc.find("sources"); it != doc.end()) {
        for (const auto& [key, text] : it->items())
            atom.sources[key] = text.get<std::string>();
    }

    validate(atom);
    return atom;
}

std::filesystem::path default_data_dir()
{
    if (const char* env = std::getenv("VQM_DATA_DIR"); env && *env)
        return env;
    return VQM_DATA_DIR;
}

AtomSpec load_atom_by_name(std::string_view name, const std::filesystem::path& data_dir)
{
    std::string file(name);
    std::transform(file.begin(), file.end(), file.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    const auto dir = data_dir.empty() ? default_data_dir() : data_dir;
    return load_atom(dir / "constants" / (file + ".json"));
}

double buffer_broadening_hz(const AtomSpec& atom, std::string_view gas, double pressure_mbar)
{
    if (pressure_mbar < 0.0)
        throw ValidationError("buffer gas pressure must be non-negative");
    if (pressure_mbar == 0.0)
        return 0.0;
    auto it = atom.buffer_broadening_hz_per_mbar.find(std::string(gas));
    if (it == atom.buffer_broadening_hz_per_mbar.end())
        throw ValidationError(atom.name + ": no broadening coefficient for buffer gas " + std::string(gas));
    return it->second * pressure_mbar;
}

} // namespace vqm
