#include "vaporqm/scenario.hpp"

#include "vaporqm/atom.hpp"
#include "vaporqm/errors.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>

namespace vqm {

using nlohmann::json;

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ScenarioConfig::Atom, species, field_tesla, include_rb85)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ScenarioConfig::Cell, length_m, temperature_k, buffer_gas, buffer_pressure_mbar,
                                   enrichment)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ScenarioConfig::Populations, polarization_in_g, manifold_fraction)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ScenarioConfig::Spectrum, half_span_hz, step_hz, strength_floor)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ScenarioConfig::Signal, source, path, start_s, rise_s, decay_s, window_s)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ScenarioConfig::Control, fwhm_s, peak_rabi_hz, center_s, readout_center_s,
                                   beam_factor)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ScenarioConfig::Pulses, alpha_sq, alpha_sq_sigma, detuning_hz,
                                   two_photon_detuning_hz, signal, control)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ScenarioConfig::Leakage, enabled, ring_frequency_hz, decay_s, e2e_loss,
                                   e2e_reference)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ScenarioConfig::OdCurve, optical_depths, method, knots, peak_rabi_cap_hz,
                                   max_iterations, tolerance, z_points, time_step_s, detuning_hz, include_decay)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ScenarioConfig::Etalon, fsr_hz, fwhm_hz, peak_transmission, center_offset_hz)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ScenarioConfig::Broadband, enabled, center_hz, fwhm_hz, passband_transmission,
                                   floor_db)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ScenarioConfig::Filters, etalons, broadband, polarization_suppression_db,
                                   insertion_transmission, control_photons_per_pulse)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ScenarioConfig::Detectors, eta_det, eta_det_hbt_sigma, channels)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ScenarioConfig::Run, n_triggers, repetition_rate_hz, pumping_window_s,
                                   lifetime_hold_times_s, lifetime_triggers)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ScenarioConfig::Tags, signal_source, internal_efficiency,
                                   noise_counts_per_trigger, dark_counts_per_trigger_per_bin,
                                   offset_counts_per_trigger_per_bin, bin_width_s, record_start_s, record_end_s,
                                   write_streams)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ScenarioConfig::Window, start_s, width_s)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ScenarioConfig::Analysis, roi, quiet_region, bin_width_s, lifetime_model,
                                   lifetime_scale_factor, lifetime_scale_note)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ScenarioConfig::Seeds, tags, lifetime)

void to_json(json& j, const ScenarioConfig::Memory& m)
{
    j = json{{"optical_depth", m.optical_depth},
             {"excited_decay_rad_s", m.excited_decay_rad_s ? json(*m.excited_decay_rad_s) : json(nullptr)},
             {"spinwave_lifetime_s", m.spinwave_lifetime_s},
             {"doppler_dephasing_rad_s", m.doppler_dephasing_rad_s},
             {"velocity_classes", m.velocity_classes},
             {"retrieval", m.retrieval},
             {"z_points", m.z_points},
             {"time_step_s", m.time_step_s},
             {"storage_window_s", m.storage_window_s},
             {"readout_window_s", m.readout_window_s},
             {"hold_time_s", m.hold_time_s},
             {"leakage", m.leakage},
             {"od_curve", m.od_curve}};
}

void from_json(const json& j, ScenarioConfig::Memory& m)
{
    j.at("optical_depth").get_to(m.optical_depth);
    const auto& g = j.at("excited_decay_rad_s");
    m.excited_decay_rad_s = g.is_null() ? std::nullopt : std::optional<double>(g.get<double>());
    j.at("spinwave_lifetime_s").get_to(m.spinwave_lifetime_s);
    j.at("doppler_dephasing_rad_s").get_to(m.doppler_dephasing_rad_s);
    j.at("velocity_classes").get_to(m.velocity_classes);
    j.at("retrieval").get_to(m.retrieval);
    j.at("z_points").get_to(m.z_points);
    j.at("time_step_s").get_to(m.time_step_s);
    j.at("storage_window_s").get_to(m.storage_window_s);
    j.at("readout_window_s").get_to(m.readout_window_s);
    j.at("hold_time_s").get_to(m.hold_time_s);
    j.at("leakage").get_to(m.leakage);
    j.at("od_curve").get_to(m.od_curve);
}

namespace {

enum class Kind { number, optional_number, integer, boolean, string, number_array, integer_array, object_array };

constexpr double inf = std::numeric_limits<double>::infinity();

struct Range {
    double lo = -inf, hi = inf;
    bool lo_open = false, hi_open = false;
};

constexpr Range any{};
constexpr Range nonneg{0.0, inf, false, false};
constexpr Range positive{0.0, inf, true, false};
constexpr Range fraction{0.0, 1.0, false, false};
constexpr Range open_fraction{0.0, 1.0, true, false}; // (0, 1]

struct Field {
    std::string path;
    Kind kind;
    std::optional<json> fallback; ///< nullopt: required
    Range range = any;
    std::vector<std::string> choices = {};
};

const std::vector<Field>& schema()
{
    static const std::vector<Field> fields = {
        {"name", Kind::string, json("unnamed")},
        {"description", Kind::string, json("")},
        {"atom.species", Kind::string, json("Rb87"), any, {"Rb87", "Rb85"}},
        {"atom.field_tesla", Kind::number, json(1.06), nonneg},
        {"atom.include_rb85", Kind::boolean, json(false)},
        {"cell.length_m", Kind::number, json(2e-3), positive},
        {"cell.temperature_k", Kind::number, std::nullopt, {250.0, 500.0, true, true}},
        {"cell.buffer_gas", Kind::string, json("Ar")},
        {"cell.buffer_pressure_mbar", Kind::number, json(11.0), nonneg},
        {"cell.enrichment", Kind::number, json(0.9), fraction},
        {"populations.polarization_in_g", Kind::number, json(0.88), fraction},
        {"populations.manifold_fraction", Kind::number, json(0.25), open_fraction},
        {"spectrum.half_span_hz", Kind::number, json(60e9), positive},
        {"spectrum.step_hz", Kind::number, json(10e6), positive},
        {"spectrum.strength_floor", Kind::number, json(1e-6), nonneg},
        {"pulses.alpha_sq", Kind::number, json(0.97), nonneg},
        {"pulses.alpha_sq_sigma", Kind::number, json(0.06), nonneg},
        {"pulses.detuning_hz", Kind::number, json(-750e6)},
        {"pulses.two_photon_detuning_hz", Kind::number, json(0.0)},
        {"pulses.signal.source", Kind::string, json("template"), any, {"template", "file"}},
        {"pulses.signal.path", Kind::string, json("")},
        {"pulses.signal.start_s", Kind::number, json(1e-9), nonneg},
        {"pulses.signal.rise_s", Kind::number, json(0.5e-9), positive},
        {"pulses.signal.decay_s", Kind::number, json(1.5e-9), positive},
        {"pulses.signal.window_s", Kind::number, json(6.48e-9), positive},
        {"pulses.control.fwhm_s", Kind::number, json(3.8e-9), positive},
        {"pulses.control.peak_rabi_hz", Kind::number, json(683e6), positive},
        {"pulses.control.center_s", Kind::number, json(2.5e-9), nonneg},
        {"pulses.control.readout_center_s", Kind::number, json(2.5e-9), nonneg},
        {"pulses.control.beam_factor", Kind::number, json(1.0), open_fraction},
        {"memory.optical_depth", Kind::number, json(2.0), nonneg},
        {"memory.excited_decay_rad_s", Kind::optional_number, json(nullptr), positive},
        {"memory.spinwave_lifetime_s", Kind::number, json(224e-9), positive},
        {"memory.doppler_dephasing_rad_s", Kind::number, json(0.0), nonneg},
        {"memory.velocity_classes", Kind::integer, json(1), {1.0, 1001.0, false, false}},
        {"memory.retrieval", Kind::string, json("forward"), any, {"forward", "backward"}},
        {"memory.z_points", Kind::integer, json(201), {3.0, 1e5, false, false}},
        {"memory.time_step_s", Kind::number, json(5e-12), positive},
        {"memory.storage_window_s", Kind::number, json(12e-9), positive},
        {"memory.readout_window_s", Kind::number, json(10e-9), positive},
        {"memory.hold_time_s", Kind::number, json(80e-9), nonneg},
        {"memory.leakage.enabled", Kind::boolean, json(true)},
        {"memory.leakage.ring_frequency_hz", Kind::number, json(250e6), positive},
        {"memory.leakage.decay_s", Kind::number, json(20e-9), positive},
        {"memory.leakage.e2e_loss", Kind::number, json(0.0074), {0.0, 1.0, false, true}},
        {"memory.leakage.e2e_reference", Kind::number, json(0.0312), open_fraction},
        {"memory.od_curve.optical_depths", Kind::number_array, json::array(), nonneg},
        {"memory.od_curve.method", Kind::string, json("time_reversal"), any, {"time_reversal", "gradient_ascent"}},
        {"memory.od_curve.knots", Kind::integer, json(12), {2.0, 1000.0, false, false}},
        {"memory.od_curve.peak_rabi_cap_hz", Kind::number, json(2e9), positive},
        {"memory.od_curve.max_iterations", Kind::integer, json(200), {1.0, 1e6, false, false}},
        {"memory.od_curve.tolerance", Kind::number, json(1e-4), positive},
        {"memory.od_curve.z_points", Kind::integer, json(101), {3.0, 1e5, false, false}},
        {"memory.od_curve.time_step_s", Kind::number, json(10e-12), positive},
        {"memory.od_curve.detuning_hz", Kind::number, json(0.0)},
        {"memory.od_curve.include_decay", Kind::boolean, json(false)},
        {"filters.etalons", Kind::object_array, json::array()},
        {"filters.etalons[].fsr_hz", Kind::number, std::nullopt, positive},
        {"filters.etalons[].fwhm_hz", Kind::number, std::nullopt, positive},
        {"filters.etalons[].peak_transmission", Kind::number, json(1.0), open_fraction},
        {"filters.etalons[].center_offset_hz", Kind::number, json(0.0)},
        {"filters.broadband.enabled", Kind::boolean, json(true)},
        {"filters.broadband.center_hz", Kind::number, json(0.0)},
        {"filters.broadband.fwhm_hz", Kind::number, json(182e9), positive},
        {"filters.broadband.passband_transmission", Kind::number, json(1.0), open_fraction},
        {"filters.broadband.floor_db", Kind::number, json(40.0), nonneg},
        {"filters.polarization_suppression_db", Kind::number, json(80.0), nonneg},
        {"filters.insertion_transmission", Kind::number, json(1.0), open_fraction},
        {"filters.control_photons_per_pulse", Kind::number, json(1e10), nonneg},
        {"detectors.eta_det", Kind::number, json(0.888), fraction},
        {"detectors.eta_det_hbt_sigma", Kind::number, json(0.04), nonneg},
        {"detectors.channels", Kind::integer_array, json::array({0, 1}), {0.0, 65535.0, false, false}},
        {"run.n_triggers", Kind::number, json(1.81e7), {1.0, 1e15, false, false}},
        {"run.repetition_rate_hz", Kind::number, json(300e3), positive},
        {"run.pumping_window_s", Kind::number, json(2.8e-6), nonneg},
        {"run.lifetime_hold_times_s", Kind::number_array,
         json::array({20e-9, 80e-9, 160e-9, 240e-9, 320e-9, 400e-9, 480e-9}), nonneg},
        {"run.lifetime_triggers", Kind::number, json(2e6), {1.0, 1e15, false, false}},
        {"tags.signal_source", Kind::string, json("memory"), any, {"memory", "configured"}},
        {"tags.internal_efficiency", Kind::number, json(0.229), open_fraction},
        {"tags.noise_counts_per_trigger", Kind::number, json(2.3646e-3), nonneg},
        {"tags.dark_counts_per_trigger_per_bin", Kind::number, json(1e-7), nonneg},
        {"tags.offset_counts_per_trigger_per_bin", Kind::number, json(1.0117e-5), nonneg},
        {"tags.bin_width_s", Kind::number, json(162e-12), positive},
        {"tags.record_start_s", Kind::number, json(0.0), nonneg},
        {"tags.record_end_s", Kind::number, json(162e-9), positive},
        {"tags.write_streams", Kind::boolean, json(false)},
        {"analysis.roi.start_s", Kind::number, json(81e-9), nonneg},
        {"analysis.roi.width_s", Kind::number, json(6.48e-9), positive},
        {"analysis.quiet_region.start_s", Kind::number, std::nullopt, nonneg},
        {"analysis.quiet_region.width_s", Kind::number, std::nullopt, positive},
        {"analysis.bin_width_s", Kind::number, json(540e-12), positive},
        {"analysis.lifetime_model", Kind::string, json("exponential"), any, {"exponential", "gaussian"}},
        {"analysis.lifetime_scale_factor", Kind::number, json(1.13), positive},
        {"analysis.lifetime_scale_note", Kind::string, json("")},
        {"seeds.tags", Kind::integer, json(1), {0.0, 1.8e19, false, false}},
        {"seeds.lifetime", Kind::integer, json(2), {0.0, 1.8e19, false, false}},
    };
    return fields;
}

std::vector<std::string> split(const std::string& path)
{
    std::vector<std::string> out;
    std::size_t a = 0;
    while (true) {
        const auto b = path.find('.', a);
        out.push_back(path.substr(a, b - a));
        if (b == std::string::npos)
            break;
        a = b + 1;
    }
    return out;
}

std::string describe(Kind k)
{
    switch (k) {
    case Kind::number: return "a number";
    case Kind::optional_number: return "a number or null";
    case Kind::integer: return "an integer";
    case Kind::boolean: return "a boolean";
    case Kind::string: return "a string";
    case Kind::number_array: return "an array of numbers";
    case Kind::integer_array: return "an array of integers";
    case Kind::object_array: return "an array of objects";
    }
    return "a value";
}

bool is_integral(const json& v)
{
    if (v.is_number_integer())
        return true;
    if (!v.is_number_float())
        return false;
    const double d = v.get<double>();
    return std::isfinite(d) && std::floor(d) == d;
}

void check_range(const std::string& path, double v, const Range& r)
{
    const bool below = r.lo_open ? !(v > r.lo) : !(v >= r.lo);
    const bool above = r.hi_open ? !(v < r.hi) : !(v <= r.hi);
    if (below || above || std::isnan(v)) {
        std::string lo = std::isinf(r.lo) ? "-inf" : nlohmann::json(r.lo).dump();
        std::string hi = std::isinf(r.hi) ? "inf" : nlohmann::json(r.hi).dump();
        throw ValidationError(path + ": value " + nlohmann::json(v).dump() + " out of range " +
                              (r.lo_open ? "(" : "[") + lo + ", " + hi + (r.hi_open ? ")" : "]"));
    }
}

void check_value(const std::string& path, json& v, const Field& f)
{
    auto fail = [&] { throw ValidationError(path + ": expected " + describe(f.kind)); };
    switch (f.kind) {
    case Kind::optional_number:
        if (v.is_null())
            return;
        [[fallthrough]];
    case Kind::number:
        if (!v.is_number())
            fail();
        check_range(path, v.get<double>(), f.range);
        v = v.get<double>();
        return;
    case Kind::integer:
        if (!is_integral(v))
            fail();
        check_range(path, v.get<double>(), f.range);
        if (v.is_number_float())
            v = static_cast<std::int64_t>(v.get<double>());
        return;
    case Kind::boolean:
        if (!v.is_boolean())
            fail();
        return;
    case Kind::string:
        if (!v.is_string())
            fail();
        if (!f.choices.empty() && std::find(f.choices.begin(), f.choices.end(), v.get<std::string>()) == f.choices.end()) {
            std::string opts;
            for (const auto& c : f.choices)
                opts += (opts.empty() ? "" : ", ") + c;
            throw ValidationError(path + ": '" + v.get<std::string>() + "' is not one of " + opts);
        }
        return;
    case Kind::number_array:
    case Kind::integer_array:
        if (!v.is_array())
            fail();
        for (std::size_t i = 0; i < v.size(); ++i) {
            const std::string p = path + "[" + std::to_string(i) + "]";
            if (f.kind == Kind::integer_array ? !is_integral(v[i]) : !v[i].is_number())
                throw ValidationError(p + ": expected " + (f.kind == Kind::integer_array ? "an integer" : "a number"));
            check_range(p, v[i].get<double>(), f.range);
            if (f.kind == Kind::number_array)
                v[i] = v[i].get<double>();
            else if (v[i].is_number_float())
                v[i] = static_cast<std::int64_t>(v[i].get<double>());
        }
        return;
    case Kind::object_array:
        if (!v.is_array())
            fail();
        for (std::size_t i = 0; i < v.size(); ++i)
            if (!v[i].is_object())
                throw ValidationError(path + "[" + std::to_string(i) + "]: expected an object");
        return;
    }
}

// Fill one object level: `fields` are relative to `obj`, paths reported with `prefix`.
void resolve_fields(json& root, const std::string& prefix, const std::vector<const Field*>& fields,
                    std::size_t strip, json& provenance)
{
    for (const Field* f : fields) {
        const auto parts = split(f->path.substr(strip));
        json* node = &root;
        for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
            json& next = (*node)[parts[i]];
            if (next.is_null())
                next = json::object();
            else if (!next.is_object())
                throw ValidationError(prefix + parts[i] + ": expected an object");
            node = &next;
        }
        const std::string path = prefix + f->path.substr(strip);
        auto it = node->find(parts.back());
        if (it == node->end()) {
            if (!f->fallback)
                throw ValidationError(path + ": required field is missing");
            (*node)[parts.back()] = *f->fallback;
            provenance[path] = "default";
            continue;
        }
        check_value(path, *it, *f);
        provenance[path] = "config";
    }
}

void reject_unknown(const json& node, const std::string& path, const std::set<std::string>& known,
                    const std::string& pattern)
{
    for (auto it = node.begin(); it != node.end(); ++it) {
        const std::string key_path = path.empty() ? it.key() : path + "." + it.key();
        const std::string key_pattern = pattern.empty() ? it.key() : pattern + "." + it.key();
        if (!known.count(key_pattern))
            throw ValidationError(key_path + ": unknown key");
        if (it->is_object())
            reject_unknown(*it, key_path, known, key_pattern);
        else if (it->is_array() && known.count(key_pattern + "[]"))
            for (std::size_t i = 0; i < it->size(); ++i)
                if ((*it)[i].is_object())
                    reject_unknown((*it)[i], key_path + "[" + std::to_string(i) + "]", known, key_pattern + "[]");
    }
}

} // namespace

ScenarioConfig resolve_scenario(const json& document, const std::filesystem::path& base_dir)
{
    if (!document.is_object())
        throw ValidationError("scenario: top level must be an object");

    std::set<std::string> known;
    for (const auto& f : schema()) {
        std::string p;
        for (const auto& part : split(f.path)) {
            p += (p.empty() ? "" : ".") + part;
            known.insert(p);
        }
        if (f.kind == Kind::object_array)
            known.insert(f.path + "[]");
    }
    reject_unknown(document, "", known, "");

    json doc = document;
    json provenance = json::object();
    std::vector<const Field*> top, element;
    for (const auto& f : schema())
        (f.path.find("[]") == std::string::npos ? top : element).push_back(&f);
    resolve_fields(doc, "", top, 0, provenance);

    const std::string array_path = "filters.etalons";
    json& etalons = doc["filters"]["etalons"];
    for (std::size_t i = 0; i < etalons.size(); ++i) {
        const std::string prefix = array_path + "[" + std::to_string(i) + "].";
        resolve_fields(etalons[i], prefix, element, array_path.size() + 3, provenance);
    }

    ScenarioConfig cfg;
    try {
        doc.at("name").get_to(cfg.name);
        doc.at("description").get_to(cfg.description);
        doc.at("atom").get_to(cfg.atom);
        doc.at("cell").get_to(cfg.cell);
        doc.at("populations").get_to(cfg.populations);
        doc.at("spectrum").get_to(cfg.spectrum);
        doc.at("pulses").get_to(cfg.pulses);
        doc.at("memory").get_to(cfg.memory);
        doc.at("filters").get_to(cfg.filters);
        doc.at("detectors").get_to(cfg.detectors);
        doc.at("run").get_to(cfg.run);
        doc.at("tags").get_to(cfg.tags);
        doc.at("analysis").get_to(cfg.analysis);
        doc.at("seeds").get_to(cfg.seeds);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("scenario: ") + e.what());
    }

    for (std::size_t i = 0; i < cfg.filters.etalons.size(); ++i) {
        const auto& e = cfg.filters.etalons[i];
        if (!(e.fwhm_hz < e.fsr_hz))
            throw ValidationError("filters.etalons[" + std::to_string(i) + "].fwhm_hz: must be below fsr_hz");
    }
    if (cfg.tags.record_end_s <= cfg.tags.record_start_s)
        throw ValidationError("tags.record_end_s: must exceed tags.record_start_s");
    if (cfg.pulses.signal.source == "file" && cfg.pulses.signal.path.empty())
        throw ValidationError("pulses.signal.path: required when pulses.signal.source is 'file'");

    cfg.provenance = std::move(provenance);
    cfg.base_dir = base_dir;
    return cfg;
}

bool ScenarioConfig::operator==(const ScenarioConfig& o) const
{
    return name == o.name && description == o.description && atom == o.atom && cell == o.cell &&
           populations == o.populations && spectrum == o.spectrum && pulses == o.pulses && memory == o.memory &&
           filters == o.filters && detectors == o.detectors && run == o.run && tags == o.tags &&
           analysis == o.analysis && seeds == o.seeds;
}

json ScenarioConfig::to_json() const
{
    return json{{"name", name},       {"description", description}, {"atom", atom},
                {"cell", cell},       {"populations", populations}, {"spectrum", spectrum},
                {"pulses", pulses},   {"memory", memory},           {"filters", filters},
                {"detectors", detectors}, {"run", run},             {"tags", tags},
                {"analysis", analysis},   {"seeds", seeds}};
}

FilterChain ScenarioConfig::filter_chain() const
{
    FilterChain chain;
    for (const auto& e : filters.etalons)
        chain.etalons.push_back({e.fsr_hz, e.fwhm_hz, e.peak_transmission, e.center_offset_hz});
    if (filters.broadband.enabled) {
        const auto& b = filters.broadband;
        chain.broadband = InterferenceFilter{b.center_hz, b.fwhm_hz, b.passband_transmission, b.floor_db};
    }
    chain.polarization_suppression_db = filters.polarization_suppression_db;
    chain.validate();
    return chain;
}

ScenarioConfig load_scenario(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open scenario " + path.string());
    json doc;
    try {
        doc = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    return resolve_scenario(doc, path.parent_path());
}

void save_scenario(const ScenarioConfig& config, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw ValidationError("cannot write " + path.string());
    out << config.to_json().dump(2) << '\n';
}

std::filesystem::path bundled_scenario(std::string_view name)
{
    auto p = default_data_dir() / "scenarios" / (std::string(name) + ".json");
    if (!std::filesystem::exists(p))
        throw ValidationError("no bundled scenario named '" + std::string(name) + "' in " + p.parent_path().string());
    return p;
}

} // namespace vqm
