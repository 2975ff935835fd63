#include "vaporqm/pipeline.hpp"

#include "vaporqm/atom.hpp"
#include "vaporqm/errors.hpp"
#include "vaporqm/filters.hpp"
#include "vaporqm/mbe.hpp"
#include "vaporqm/optimize.hpp"
#include "vaporqm/photon_stats.hpp"
#include "vaporqm/physical_constants.hpp"
#include "vaporqm/spectrum.hpp"
#include "vaporqm/vapor.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#ifndef VQM_VERSION
#define VQM_VERSION "0.0.0"
#endif

namespace vqm {

using nlohmann::json;

namespace {

constexpr Stage all_stages[] = {Stage::spectrum, Stage::memory, Stage::filters, Stage::tags, Stage::analysis};

std::string utc_now()
{
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream s;
    s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return s.str();
}

std::string pulse_csv(const PulseShape& p)
{
    std::ostringstream s;
    s << "time_s,re,im\n" << std::setprecision(12);
    for (std::size_t i = 0; i < p.samples.size(); ++i)
        s << p.grid.at(i) << ',' << p.samples[i].real() << ',' << p.samples[i].imag() << '\n';
    return s.str();
}

json measured(const Measured& m)
{
    return {{"value", m.value}, {"sigma", m.sigma}};
}

struct Context {
    const ScenarioConfig& cfg;
    AtomSpec atom;
    std::optional<LevelStructure> levels;

    // memory
    bool have_memory = false;
    LambdaParams params;
    PulseShape retrieved;
    double eta_int_zero = 0.0;
    double eta_int_at_hold = 0.0;

    // filters
    bool have_filters = false;
    double passive = 0.0;

    // tags
    bool have_tags = false;
    TimeTagStream retrieval_tags;
    TimeTagStream blocked_tags;
    double eta_int_true = 0.0;
    double e2e_true = 0.0;
    double hbt = 0.0;

    explicit Context(const ScenarioConfig& c) : cfg(c), atom(load_atom_by_name(c.atom.species)) {}

    const LevelStructure& level_data()
    {
        if (!levels)
            levels = level_structure(atom, cfg.atom.field_tesla);
        return *levels;
    }

    double ground_splitting_hz()
    {
        const auto& lv = level_data();
        return find_state(lv.ground, +1, atom.two_i).energy_hz - find_state(lv.ground, -1, atom.two_i).energy_hz;
    }
};

void stage_spectrum(Context& ctx, RunRecord& rec)
{
    const auto& cfg = ctx.cfg;
    const auto& atom = ctx.atom;
    const auto& lv = ctx.level_data();
    const auto lines = transition_table(lv, {}, cfg.spectrum.strength_floor);
    const auto& signal = find_line(lines, +1, atom.two_i, +1, atom.two_i);
    const auto& control = find_line(lines, -1, atom.two_i, +1, atom.two_i);

    const double n_isotope = number_density(atom, cfg.cell.temperature_k, cfg.cell.enrichment, 1.0);
    const double n_manifold = n_isotope * cfg.populations.manifold_fraction;
    const auto ground_states = static_cast<double>(lv.ground.size());
    const double broadening = buffer_broadening_hz(atom, cfg.cell.buffer_gas, cfg.cell.buffer_pressure_mbar);

    VaporConditions vapor{cfg.cell.temperature_k, n_isotope / ground_states, cfg.cell.length_m, broadening};
    const auto grid = FrequencyGrid::centered(cfg.spectrum.half_span_hz, cfg.spectrum.step_hz);
    auto spectrum = voigt_absorption_spectrum(atom, lines, vapor, grid);

    json out;
    if (cfg.atom.include_rb85) {
        const std::string other = atom.name == "Rb87" ? "Rb85" : "Rb87";
        const auto minor = load_atom_by_name(other);
        const auto minor_lines = transition_table(minor, cfg.atom.field_tesla, {}, cfg.spectrum.strength_floor);
        const double n_minor = number_density(minor, cfg.cell.temperature_k, 1.0 - cfg.cell.enrichment, 1.0);
        const double minor_states = static_cast<double>((minor.two_i + 1) * (minor.ground.two_j + 1));
        VaporConditions mv{cfg.cell.temperature_k, n_minor / minor_states, cfg.cell.length_m,
                           buffer_broadening_hz(minor, cfg.cell.buffer_gas, cfg.cell.buffer_pressure_mbar)};
        const double shift = minor.transition_frequency_hz - atom.transition_frequency_hz;
        spectrum = combine(spectrum, voigt_absorption_spectrum(minor, minor_lines, mv, grid, shift));
        out["minor_isotope"] = {{"species", other}, {"density_m3", n_minor}, {"isotope_shift_hz", shift}};
    }

    VaporConditions unpumped = vapor;
    unpumped.density_m3 = n_manifold / 2.0;
    VaporConditions pumped = vapor;
    pumped.density_m3 = n_manifold * cfg.populations.polarization_in_g;
    const double f_sig = signal.frequency_offset_hz;

    out["field_tesla"] = cfg.atom.field_tesla;
    out["ground_splitting_hz"] = ctx.ground_splitting_hz();
    out["signal_line"] = {{"frequency_offset_hz", f_sig}, {"dipole_strength", signal.dipole_strength},
                          {"polarization", to_string(signal.polarization)}};
    out["control_line"] = {{"frequency_offset_hz", control.frequency_offset_hz},
                           {"dipole_strength", control.dipole_strength},
                           {"polarization", to_string(control.polarization)}};
    out["line_count"] = lines.size();
    out["isotope_density_m3"] = n_isotope;
    out["manifold_density_m3"] = n_manifold;
    out["manifold_density_cm3"] = n_manifold * 1e-6;
    out["buffer_broadening_hz"] = broadening;
    out["doppler_sigma_hz"] = doppler_sigma_hz(atom, cfg.cell.temperature_k);
    out["signal_line_od_unpumped"] = line_optical_depth(atom, signal, unpumped, f_sig);
    out["signal_line_od_pumped"] = line_optical_depth(atom, signal, pumped, f_sig);
    out["signal_od_unpumped"] = spectrum.at(f_sig);
    out["peak_od"] = spectrum.peak();
    rec.document["outputs"]["spectrum"] = out;

    std::ostringstream s;
    s << "frequency_hz,optical_depth\n" << std::setprecision(12);
    for (std::size_t i = 0; i < spectrum.frequency_hz.size(); ++i)
        s << spectrum.frequency_hz[i] << ',' << spectrum.optical_depth[i] << '\n';
    rec.sidecars["spectrum.csv"] = s.str();

    std::ostringstream t;
    t << "frequency_offset_hz,dipole_strength,polarization,lower_two_mj,lower_two_mi,upper_two_mj,upper_two_mi\n"
      << std::setprecision(12);
    for (const auto& l : lines)
        t << l.frequency_offset_hz << ',' << l.dipole_strength << ',' << to_string(l.polarization) << ','
          << l.lower.two_mj << ',' << l.lower.two_mi << ',' << l.upper.two_mj << ',' << l.upper.two_mi << '\n';
    rec.sidecars["transitions.csv"] = t.str();
}

LambdaParams memory_params(Context& ctx)
{
    const auto& cfg = ctx.cfg;
    const auto& m = cfg.memory;
    LambdaParams p;
    p.detuning_rad_s = constants::two_pi * cfg.pulses.detuning_hz;
    p.two_photon_detuning_rad_s = constants::two_pi * cfg.pulses.two_photon_detuning_hz;
    p.optical_depth = m.optical_depth;
    if (m.excited_decay_rad_s) {
        p.excited_decay_rad_s = *m.excited_decay_rad_s;
    } else {
        const double fwhm = buffer_broadening_hz(ctx.atom, cfg.cell.buffer_gas, cfg.cell.buffer_pressure_mbar);
        p.excited_decay_rad_s = 0.5 * ctx.atom.natural_linewidth_rad_s + constants::pi * fwhm;
    }
    p.spinwave_lifetime_s = m.spinwave_lifetime_s;
    p.doppler_dephasing_rad_s = m.doppler_dephasing_rad_s;
    p.velocity_classes = static_cast<std::size_t>(m.velocity_classes);
    if (p.velocity_classes > 1)
        p.doppler_sigma_rad_s = constants::two_pi * doppler_sigma_hz(ctx.atom, cfg.cell.temperature_k);
    p.retrieval = m.retrieval == "backward" ? RetrievalDirection::backward : RetrievalDirection::forward;
    p.validate();
    return p;
}

PulseShape signal_pulse(const ScenarioConfig& cfg, const TimeGrid& grid)
{
    const auto& s = cfg.pulses.signal;
    if (s.source == "file") {
        auto path = std::filesystem::path(s.path);
        if (path.is_relative())
            path = cfg.base_dir / path;
        return normalized(read_pulse_csv(path), cfg.pulses.alpha_sq);
    }
    return signal_template(grid, s.start_s, cfg.pulses.alpha_sq, s.rise_s, s.decay_s, s.window_s);
}

void stage_memory(Context& ctx, RunRecord& rec)
{
    const auto& cfg = ctx.cfg;
    const auto& m = cfg.memory;
    const auto params = memory_params(ctx);
    SolverOptions opts;
    opts.z_points = static_cast<std::size_t>(m.z_points);

    auto signal = signal_pulse(cfg, TimeGrid::spanning(0.0, m.storage_window_s, m.time_step_s));
    if (!(signal.energy() > 0.0))
        throw ValidationError("pulses.alpha_sq: the signal must carry photons for the memory stage");
    const TimeGrid& grid = signal.grid;
    const double omega = constants::two_pi * cfg.pulses.control.peak_rabi_hz * cfg.pulses.control.beam_factor;
    const auto control = gaussian_control(grid, cfg.pulses.control.center_s, cfg.pulses.control.fwhm_s, omega);
    const auto storage = simulate_storage(params, signal, control, opts);

    const auto rgrid = TimeGrid::spanning(0.0, m.readout_window_s, m.time_step_s);
    const auto readout = gaussian_control(rgrid, cfg.pulses.control.readout_center_s, cfg.pulses.control.fwhm_s, omega);
    const auto r0 = simulate_retrieval(storage.fields, params, readout, 0.0, opts);
    const auto rh = simulate_retrieval(storage.fields, params, readout, m.hold_time_s, opts);

    json out;
    out["parameters"] = {{"detuning_rad_s", params.detuning_rad_s},
                         {"optical_depth", params.optical_depth},
                         {"excited_decay_rad_s", params.excited_decay_rad_s},
                         {"spinwave_lifetime_s", params.spinwave_lifetime_s},
                         {"two_photon_detuning_rad_s", params.two_photon_detuning_rad_s},
                         {"doppler_dephasing_rad_s", params.doppler_dephasing_rad_s},
                         {"velocity_classes", params.velocity_classes},
                         {"doppler_sigma_rad_s", params.doppler_sigma_rad_s},
                         {"peak_rabi_rad_s", omega},
                         {"retrieval", m.retrieval}};
    out["input_photons"] = storage.result.input_photons;
    out["eta_storage"] = storage.result.eta_storage;
    out["eta_leaked"] = storage.result.leaked_pulse.energy() / storage.result.input_photons;
    out["eta_retrieval"] = r0.eta_retrieval;
    out["eta_internal_total"] = r0.eta_internal_total;
    out["hold_time_s"] = m.hold_time_s;
    out["decay_factor"] = rh.decay_factor;
    out["eta_internal_total_at_hold"] = rh.eta_internal_total;

    ctx.params = params;
    ctx.retrieved = r0.retrieved_pulse;
    ctx.eta_int_zero = r0.eta_internal_total;
    ctx.eta_int_at_hold = rh.eta_internal_total;

    if (m.leakage.enabled && m.hold_time_s > 0.0) {
        const auto hgrid = TimeGrid::spanning(0.0, m.hold_time_s, 4.0 * m.time_step_s);
        const double unit = constants::two_pi * 10e6;
        const auto waveform = decaying_sinusoid(hgrid, 0.0, unit, m.leakage.ring_frequency_hz, m.leakage.decay_s);
        const double target = m.leakage.e2e_loss / (m.leakage.e2e_reference + m.leakage.e2e_loss);
        json leak{{"target_fraction", target}};
        if (target > 0.0) {
            const double scale = calibrate_leakage_scale(storage.fields, params, waveform, target, opts);
            const auto hold = apply_control_leakage(storage.fields, params, waveform.scaled(scale), opts);
            const auto after = simulate_retrieval(hold.fields, params, readout, 0.0, opts);
            leak["amplitude_rad_s"] = unit * scale;
            leak["unintentional_readout_fraction"] = hold.result.unintentional_readout_fraction;
            leak["eta_internal_total_at_hold"] = after.eta_internal_total;
            ctx.eta_int_at_hold = after.eta_internal_total;
            rec.sidecars["unintentional_pulse.csv"] = pulse_csv(hold.result.unintentional_pulse);
        } else {
            leak["amplitude_rad_s"] = 0.0;
            leak["unintentional_readout_fraction"] = 0.0;
            leak["eta_internal_total_at_hold"] = rh.eta_internal_total;
        }
        out["leakage"] = leak;
    }

    if (!m.od_curve.optical_depths.empty()) {
        const auto& oc = m.od_curve;
        LambdaParams p = params;
        p.detuning_rad_s = constants::two_pi * oc.detuning_hz;
        p.velocity_classes = 1;
        p.doppler_sigma_rad_s = 0.0;
        if (!oc.include_decay)
            p.spinwave_lifetime_s = std::numeric_limits<double>::infinity();
        const auto osig = signal_pulse(cfg, TimeGrid::spanning(0.0, m.storage_window_s, oc.time_step_s));
        ControlConstraints cc;
        cc.peak_rabi_cap_rad_s = constants::two_pi * oc.peak_rabi_cap_hz;
        cc.knots = static_cast<std::size_t>(oc.knots);
        OptimizerOptions oo;
        oo.method = parse_optimizer_method(oc.method);
        oo.max_iterations = static_cast<std::size_t>(oc.max_iterations);
        oo.tolerance = oc.tolerance;
        oo.solver.z_points = static_cast<std::size_t>(oc.z_points);
        const auto curve = efficiency_vs_od_curve(oc.optical_depths, p, osig, cc, oo);
        json pts = json::array();
        for (const auto& c : curve)
            pts.push_back({{"optical_depth", c.optical_depth},
                           {"efficiency", c.efficiency},
                           {"eta_storage", c.eta_storage},
                           {"iterations", c.iterations},
                           {"converged", c.converged}});
        out["od_curve"] = pts;
        std::ostringstream s;
        write_od_curve_csv(s, curve);
        rec.sidecars["od_curve.csv"] = s.str();
    }

    rec.document["outputs"]["memory"] = out;
    rec.sidecars["signal_in.csv"] = pulse_csv(signal);
    rec.sidecars["control.csv"] = pulse_csv(control);
    rec.sidecars["leaked_pulse.csv"] = pulse_csv(storage.result.leaked_pulse);
    rec.sidecars["retrieved_pulse.csv"] = pulse_csv(r0.retrieved_pulse);
    std::ostringstream sw;
    sw << "z,re,im\n" << std::setprecision(12);
    for (std::size_t j = 0; j < storage.result.z.size(); ++j)
        sw << storage.result.z[j] << ',' << storage.result.spinwave_snapshot[j].real() << ','
           << storage.result.spinwave_snapshot[j].imag() << '\n';
    rec.sidecars["spinwave.csv"] = sw.str();
    ctx.have_memory = true;
}

void stage_filters(Context& ctx, RunRecord& rec)
{
    const auto& cfg = ctx.cfg;
    const auto chain = cfg.filter_chain();
    const double control_offset = ctx.ground_splitting_hz();
    const auto budget = control_suppression_budget(chain, cfg.filters.control_photons_per_pulse, control_offset);

    json out;
    out["control_offset_hz"] = control_offset;
    out["signal_spectral_transmission"] = chain.spectral_transmission(0.0);
    out["insertion_transmission"] = cfg.filters.insertion_transmission;
    out["passive_transmission"] = passive_transmission(chain, cfg.filters.insertion_transmission);
    json et = json::array();
    for (const auto& e : chain.etalons)
        et.push_back({{"fsr_hz", e.free_spectral_range_hz},
                      {"fwhm_hz", e.fwhm_hz},
                      {"finesse", e.finesse()},
                      {"suppression_at_half_fsr_db", to_db(etalon_transmission(e, e.center_offset_hz +
                                                                                    0.5 * e.free_spectral_range_hz) /
                                                            e.peak_transmission)},
                      {"transmission_at_control", etalon_transmission(e, control_offset)}});
    out["etalons"] = et;
    out["suppression_budget"] = {{"control_photons", budget.control_photons},
                                 {"polarization_db", budget.polarization_db},
                                 {"spectral_db", budget.spectral_db},
                                 {"total_db", budget.total_db},
                                 {"residual_photons", budget.residual_photons}};
    rec.document["outputs"]["filters"] = out;

    const auto grid = FrequencyGrid::centered(cfg.spectrum.half_span_hz, cfg.spectrum.step_hz).values();
    const auto curve = sample_chain(chain, grid);
    std::ostringstream s;
    s << "frequency_hz,power\n" << std::setprecision(12);
    for (std::size_t i = 0; i < curve.frequency_hz.size(); ++i)
        s << curve.frequency_hz[i] << ',' << curve.transmission[i] << '\n';
    rec.sidecars["filter_transmission.csv"] = s.str();
    ctx.passive = out["passive_transmission"].get<double>();
    ctx.have_filters = true;
}

RateProfile flat_profile(const ScenarioConfig& cfg, double per_bin)
{
    const auto& t = cfg.tags;
    const auto n = static_cast<std::size_t>(std::llround((t.record_end_s - t.record_start_s) / t.bin_width_s));
    return {t.record_start_s, t.bin_width_s, std::vector<double>(n, per_bin)};
}

void add_over_roi(const ScenarioConfig& cfg, RateProfile& p, const std::vector<double>& weights, double total)
{
    const auto& roi = cfg.analysis.roi;
    std::vector<std::size_t> bins;
    for (std::size_t b = 0; b < p.photons_per_trigger.size(); ++b) {
        const double c = p.start_s + p.bin_width_s * (static_cast<double>(b) + 0.5);
        if (c > roi.start_s && c < roi.start_s + roi.width_s)
            bins.push_back(b);
    }
    if (bins.empty())
        throw ValidationError("analysis.roi: no tag bins fall inside the ROI");
    double norm = 0.0;
    std::vector<double> w(bins.size(), 1.0);
    if (!weights.empty())
        for (std::size_t k = 0; k < bins.size(); ++k)
            w[k] = weights[k];
    for (double v : w)
        norm += v;
    if (!(norm > 0.0))
        std::fill(w.begin(), w.end(), 1.0), norm = static_cast<double>(w.size());
    for (std::size_t k = 0; k < bins.size(); ++k)
        p.photons_per_trigger[bins[k]] += total * w[k] / norm;
}

std::vector<double> retrieved_weights(const Context& ctx, const RateProfile& p)
{
    const auto& roi = ctx.cfg.analysis.roi;
    std::vector<double> w;
    for (std::size_t b = 0; b < p.photons_per_trigger.size(); ++b) {
        const double c = p.start_s + p.bin_width_s * (static_cast<double>(b) + 0.5);
        if (c > roi.start_s && c < roi.start_s + roi.width_s)
            w.push_back(std::norm(ctx.retrieved.at(c - roi.start_s)));
    }
    return w;
}

void stage_tags(Context& ctx, RunRecord& rec)
{
    const auto& cfg = ctx.cfg;
    if (!ctx.have_memory || !ctx.have_filters)
        throw ValidationError("tags stage needs memory and filters outputs");
    const double eta_det = cfg.detectors.eta_det;
    if (!(eta_det > 0.0))
        throw ValidationError("detectors.eta_det: must be positive to synthesize detections");
    const double decay = std::exp(-cfg.memory.hold_time_s / ctx.params.spinwave_lifetime_s);

    json out;
    if (cfg.tags.signal_source == "configured") {
        ctx.eta_int_true = cfg.tags.internal_efficiency;
        ctx.e2e_true = ctx.eta_int_true * decay * ctx.passive;
    } else {
        ctx.eta_int_true = ctx.eta_int_zero;
        ctx.e2e_true = ctx.eta_int_at_hold * ctx.passive;
    }
    ctx.hbt = eta_det_hbt(cfg.pulses.alpha_sq, eta_det);
    if (eta_det_hbt_out_of_domain(cfg.pulses.alpha_sq, eta_det))
        rec.document["warnings"].push_back("alpha_sq * eta_det exceeds 1; the click-probability formula is outside "
                                           "its weak-pulse domain");

    const auto n_trig = static_cast<std::uint64_t>(std::llround(cfg.run.n_triggers));
    const double signal_clicks = ctx.e2e_true * ctx.hbt;

    RateProfile noise = flat_profile(cfg, cfg.tags.dark_counts_per_trigger_per_bin / eta_det);
    add_over_roi(cfg, noise, {}, cfg.tags.noise_counts_per_trigger / eta_det);
    RateProfile noise_with_offset = noise;
    for (double& v : noise_with_offset.photons_per_trigger)
        v += cfg.tags.offset_counts_per_trigger_per_bin / eta_det;
    RateProfile signal = flat_profile(cfg, 0.0);
    add_over_roi(cfg, signal, retrieved_weights(ctx, signal), signal_clicks / eta_det);
    const RateProfile none = flat_profile(cfg, 0.0);

    ctx.retrieval_tags = generate_timetags(signal, noise_with_offset, n_trig, eta_det, cfg.seeds.tags);
    ctx.blocked_tags = generate_timetags(none, noise, n_trig, eta_det, cfg.seeds.tags + 1);
    ctx.retrieval_tags.repetition_rate_hz = ctx.blocked_tags.repetition_rate_hz = cfg.run.repetition_rate_hz;

    out["signal_source"] = cfg.tags.signal_source;
    out["eta_int_true"] = ctx.eta_int_true;
    out["eta_e2e_true"] = ctx.e2e_true;
    out["eta_det_hbt"] = ctx.hbt;
    out["expected_signal_counts"] = signal_clicks * static_cast<double>(n_trig);
    out["expected_noise_counts_roi"] = cfg.tags.noise_counts_per_trigger * static_cast<double>(n_trig);
    out["retrieval_tag_count"] = ctx.retrieval_tags.tags.size();
    out["blocked_tag_count"] = ctx.blocked_tags.tags.size();
    out["n_triggers"] = n_trig;
    rec.document["outputs"]["tags"] = out;

    if (cfg.tags.write_streams) {
        for (auto [name, stream] : {std::pair{"tags_retrieval.csv", &ctx.retrieval_tags},
                                    std::pair{"tags_blocked.csv", &ctx.blocked_tags}}) {
            std::ostringstream s;
            s << "trigger_index,channel,timestamp_ps\n";
            for (const auto& t : stream->tags)
                s << t.trigger_index << ',' << t.channel << ',' << t.timestamp_ps << '\n';
            rec.sidecars[name] = s.str();
        }
    }
    ctx.have_tags = true;
}

LifetimeSeries synthetic_lifetime(const Context& ctx)
{
    const auto& cfg = ctx.cfg;
    std::mt19937_64 rng(cfg.seeds.lifetime);
    const double n = cfg.run.lifetime_triggers;
    const double noise = cfg.tags.noise_counts_per_trigger * n;
    const double denom = ctx.hbt * n;
    LifetimeSeries s;
    s.scale_factor = cfg.analysis.lifetime_scale_factor;
    s.scale_note = cfg.analysis.lifetime_scale_note;
    for (double h : cfg.run.lifetime_hold_times_s) {
        const double e2e = ctx.eta_int_true * ctx.passive * std::exp(-h / ctx.params.spinwave_lifetime_s);
        const double sig_mean = e2e * denom / s.scale_factor;
        const auto sig = static_cast<double>(std::poisson_distribution<std::uint64_t>(sig_mean + noise)(rng));
        const auto blk = static_cast<double>(std::poisson_distribution<std::uint64_t>(noise)(rng));
        s.hold_time_s.push_back(h);
        s.efficiency.push_back((sig - blk) / denom);
        s.uncertainty.push_back(std::sqrt(std::max(sig + blk, 1.0)) / denom);
    }
    return s;
}

json fit_json(const LifetimeFit& f)
{
    return {{"model", to_string(f.model)},
            {"ok", f.ok},
            {"message", f.message},
            {"amplitude", f.amplitude},
            {"amplitude_sigma", f.amplitude_sigma},
            {"time_constant_s", f.time_constant_s},
            {"time_constant_sigma_s", f.time_constant_sigma_s},
            {"ci95_s", {f.ci_low_s, f.ci_high_s}},
            {"covariance", f.covariance},
            {"quantile", f.quantile},
            {"chi_squared", f.chi_squared},
            {"dof", f.dof},
            {"reduced_chi_squared", f.reduced_chi_squared()}};
}

void stage_analysis(Context& ctx, RunRecord& rec)
{
    const auto& cfg = ctx.cfg;
    if (!ctx.have_tags)
        throw ValidationError("analysis stage needs tags outputs");
    std::vector<std::uint16_t> channels;
    for (int c : cfg.detectors.channels)
        channels.push_back(static_cast<std::uint16_t>(c));
    const double a = cfg.tags.record_start_s, b = cfg.tags.record_end_s, w = cfg.analysis.bin_width_s;
    const auto h_ret = histogram(ctx.retrieval_tags, w, a, b, channels);
    const auto h_blk = histogram(ctx.blocked_tags, w, a, b, channels);
    const TimeWindow roi{cfg.analysis.roi.start_s, cfg.analysis.roi.width_s};
    const TimeWindow quiet{cfg.analysis.quiet_region.start_s, cfg.analysis.quiet_region.width_s};
    const auto summary = corrected_noise(h_ret, h_blk, quiet, roi);

    FomInputs in;
    in.alpha_sq = {cfg.pulses.alpha_sq, cfg.pulses.alpha_sq_sigma};
    in.eta_det_hbt = {ctx.hbt, cfg.detectors.eta_det_hbt_sigma};
    in.n_triggers = static_cast<double>(ctx.retrieval_tags.n_triggers);
    auto fom = figures_of_merit(summary, in);
    fom.eta_int_zero_time =
        internal_efficiency(fom.eta_e2e, ctx.passive, cfg.memory.hold_time_s, ctx.params.spinwave_lifetime_s);

    json out;
    out["count_summary"] = {{"n_ret", summary.n_ret},
                            {"n_noise_raw", summary.n_noise_raw},
                            {"offset_per_bin", summary.offset_per_bin},
                            {"offset_sigma", summary.offset_sigma},
                            {"roi_bins", summary.roi_bins},
                            {"spurious", summary.spurious()},
                            {"n_noise", summary.n_noise}};
    out["fom"] = {{"snr", measured(fom.snr)},
                  {"mu1", fom.mu1_defined ? measured(fom.mu1) : json(nullptr)},
                  {"mu1_defined", fom.mu1_defined},
                  {"eta_det_hbt", measured(fom.eta_det_hbt)},
                  {"eta_e2e", measured(fom.eta_e2e)},
                  {"alpha_sq", measured(fom.alpha_sq)},
                  {"eta_int_zero_time", measured(*fom.eta_int_zero_time)},
                  {"warnings", fom.warnings}};

    const auto series = synthetic_lifetime(ctx);
    const auto model = parse_decay_model(cfg.analysis.lifetime_model);
    const auto other = model == DecayModel::exponential ? DecayModel::gaussian : DecayModel::exponential;
    const auto fit = fit_lifetime(series, model);
    const auto alt = fit_lifetime(series, other);
    out["lifetime"] = {{"scale_factor", series.scale_factor},
                       {"scale_note", series.scale_note},
                       {"hold_time_s", series.hold_time_s},
                       {"efficiency_raw", series.efficiency},
                       {"uncertainty_raw", series.uncertainty},
                       {"fit", fit_json(fit)},
                       {"alternative_fit", fit_json(alt)},
                       {"preferred_model",
                        to_string(fit.ok && (!alt.ok || fit.chi_squared <= alt.chi_squared) ? model : other)}};
    rec.document["outputs"]["analysis"] = out;

    std::ostringstream s;
    s << "time_s,retrieval_counts,blocked_counts\n" << std::setprecision(12);
    const auto edges = h_ret.edges();
    for (std::size_t i = 0; i < h_ret.counts.size(); ++i)
        s << 0.5 * (edges[i] + edges[i + 1]) << ',' << h_ret.counts[i] << ',' << h_blk.counts[i] << '\n';
    rec.sidecars["histogram.csv"] = s.str();
}

void run_stage(Stage stage, Context& ctx, RunRecord& rec)
{
    switch (stage) {
    case Stage::spectrum: stage_spectrum(ctx, rec); break;
    case Stage::memory: stage_memory(ctx, rec); break;
    case Stage::filters: stage_filters(ctx, rec); break;
    case Stage::tags: stage_tags(ctx, rec); break;
    case Stage::analysis: stage_analysis(ctx, rec); break;
    }
}

std::string sha256_hex(const std::string& data, EVP_MD_CTX* md)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(md, digest, &len);
    (void)data;
    std::ostringstream s;
    for (unsigned int i = 0; i < len; ++i)
        s << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    return s.str();
}

std::string sha256_of(const std::vector<const std::string*>& parts)
{
    EVP_MD_CTX* md = EVP_MD_CTX_new();
    if (!md || EVP_DigestInit_ex(md, EVP_sha256(), nullptr) != 1) {
        EVP_MD_CTX_free(md);
        throw NumericalError("SHA-256 initialisation failed");
    }
    for (const auto* p : parts) {
        const std::uint64_t n = p->size();
        EVP_DigestUpdate(md, &n, sizeof n);
        EVP_DigestUpdate(md, p->data(), p->size());
    }
    auto hex = sha256_hex({}, md);
    EVP_MD_CTX_free(md);
    return hex;
}

} // namespace

std::string_view to_string(Stage stage)
{
    switch (stage) {
    case Stage::spectrum: return "spectrum";
    case Stage::memory: return "memory";
    case Stage::filters: return "filters";
    case Stage::tags: return "tags";
    case Stage::analysis: return "analysis";
    }
    return "unknown";
}

std::vector<Stage> parse_stages(std::string_view list)
{
    if (list == "all" || list == "full")
        return {std::begin(all_stages), std::end(all_stages)};
    std::vector<Stage> out;
    std::size_t a = 0;
    while (a <= list.size()) {
        auto b = list.find(',', a);
        if (b == std::string_view::npos)
            b = list.size();
        const auto name = list.substr(a, b - a);
        const auto* it = std::find_if(std::begin(all_stages), std::end(all_stages),
                                      [&](Stage s) { return to_string(s) == name; });
        if (it == std::end(all_stages))
            throw ValidationError("unknown stage '" + std::string(name) +
                                  "' (expected spectrum, memory, filters, tags, analysis or all)");
        if (std::find(out.begin(), out.end(), *it) == out.end())
            out.push_back(*it);
        a = b + 1;
    }
    return out;
}

std::vector<Stage> dependencies(Stage stage)
{
    switch (stage) {
    case Stage::tags: return {Stage::memory, Stage::filters};
    case Stage::analysis: return {Stage::tags};
    default: return {};
    }
}

std::vector<Stage> with_dependencies(std::vector<Stage> stages)
{
    for (std::size_t i = 0; i < stages.size(); ++i)
        for (Stage d : dependencies(stages[i]))
            if (std::find(stages.begin(), stages.end(), d) == stages.end())
                stages.push_back(d);
    std::sort(stages.begin(), stages.end());
    return stages;
}

const char* toolkit_version()
{
    return VQM_VERSION;
}

const std::string& RunRecord::content_hash() const
{
    return document.at("content_hash").get_ref<const std::string&>();
}

bool RunRecord::ok() const
{
    return failure_kind().empty();
}

std::string RunRecord::failure_kind() const
{
    for (const auto& [name, st] : document.at("status").items())
        if (st.at("state") == "failed")
            return st.at("kind");
    return {};
}

std::string RunRecord::failure_message() const
{
    for (const auto& [name, st] : document.at("status").items())
        if (st.at("state") == "failed")
            return name + ": " + st.at("message").get<std::string>();
    return {};
}

std::string compute_content_hash(const RunRecord& record)
{
    json doc = record.document;
    doc.erase("created_utc");
    doc.erase("content_hash");
    const std::string body = doc.dump();
    std::vector<const std::string*> parts{&body};
    std::vector<std::string> names;
    names.reserve(record.sidecars.size());
    for (const auto& [name, content] : record.sidecars)
        names.push_back(name);
    std::size_t i = 0;
    for (const auto& [name, content] : record.sidecars) {
        parts.push_back(&names[i++]);
        parts.push_back(&content);
    }
    return sha256_of(parts);
}

RunRecord run_pipeline(const ScenarioConfig& config, const std::vector<Stage>& stages)
{
    std::vector<Stage> ordered = stages;
    std::sort(ordered.begin(), ordered.end());
    ordered.erase(std::unique(ordered.begin(), ordered.end()), ordered.end());
    for (Stage s : ordered)
        for (Stage d : dependencies(s))
            if (std::find(ordered.begin(), ordered.end(), d) == ordered.end())
                throw ValidationError("stage '" + std::string(to_string(s)) + "' needs stage '" +
                                      std::string(to_string(d)) + "'");

    RunRecord rec;
    auto& doc = rec.document;
    const json cfg_json = config.to_json();
    const std::string cfg_dump = cfg_json.dump();
    doc["toolkit_version"] = toolkit_version();
    doc["created_utc"] = utc_now();
    doc["config"] = cfg_json;
    doc["config_hash"] = sha256_of({&cfg_dump});
    doc["provenance"] = config.provenance;
    doc["stages_requested"] = json::array();
    for (Stage s : ordered)
        doc["stages_requested"].push_back(to_string(s));
    doc["outputs"] = json::object();
    doc["warnings"] = json::array();
    doc["status"] = json::object();

    Context ctx(config);
    doc["constants"] = {{"species", ctx.atom.name}, {"version", ctx.atom.version}, {"sources", ctx.atom.sources}};

    bool halted = false;
    for (Stage s : all_stages) {
        const std::string name(to_string(s));
        if (std::find(ordered.begin(), ordered.end(), s) == ordered.end())
            continue;
        if (halted) {
            doc["status"][name] = {{"state", "skipped"}, {"message", "an earlier stage failed"}};
            continue;
        }
        try {
            run_stage(s, ctx, rec);
            doc["status"][name] = {{"state", "ok"}};
        } catch (const ValidationError& e) {
            doc["status"][name] = {{"state", "failed"}, {"kind", "validation"}, {"message", e.what()}};
            halted = true;
        } catch (const NumericalError& e) {
            doc["status"][name] = {{"state", "failed"}, {"kind", "numerical"}, {"message", e.what()}};
            halted = true;
        }
    }
    doc["sidecars"] = json::array();
    for (const auto& [file, content] : rec.sidecars)
        doc["sidecars"].push_back(file);
    doc["content_hash"] = compute_content_hash(rec);
    return rec;
}

void write_run_record(const RunRecord& record, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    for (const auto& [name, content] : record.sidecars) {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out)
            throw ValidationError("cannot write " + (dir / name).string());
        out << content;
    }
    std::ofstream out(dir / "record.json");
    if (!out)
        throw ValidationError("cannot write " + (dir / "record.json").string());
    out << record.document.dump(2) << '\n';
}

RunRecord read_run_record(const std::filesystem::path& dir)
{
    std::ifstream in(dir / "record.json");
    if (!in)
        throw ValidationError("no record.json in " + dir.string());
    RunRecord rec;
    try {
        rec.document = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError((dir / "record.json").string() + ": " + e.what());
    }
    for (const auto& name : rec.document.value("sidecars", json::array())) {
        std::ifstream s(dir / name.get<std::string>(), std::ios::binary);
        if (!s)
            throw ValidationError("missing sidecar " + name.get<std::string>() + " in " + dir.string());
        std::ostringstream buf;
        buf << s.rdbuf();
        rec.sidecars[name.get<std::string>()] = buf.str();
    }
    return rec;
}

ExportKind parse_export_kind(std::string_view name)
{
    if (name == "histogram")
        return ExportKind::histogram;
    if (name == "lifetime")
        return ExportKind::lifetime;
    if (name == "od-curve")
        return ExportKind::od_curve;
    throw ValidationError("unknown export kind '" + std::string(name) + "' (expected histogram, lifetime or od-curve)");
}

std::string_view to_string(ExportKind kind)
{
    switch (kind) {
    case ExportKind::histogram: return "histogram";
    case ExportKind::lifetime: return "lifetime";
    case ExportKind::od_curve: return "od-curve";
    }
    return "unknown";
}

namespace {

json column(const char* name, const char* unit, const char* description)
{
    return {{"name", name}, {"unit", unit}, {"description", description}};
}

std::filesystem::path write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ValidationError("cannot write " + path.string());
    out << text;
    return path;
}

LifetimeFit fit_from_json(const json& j)
{
    LifetimeFit f;
    f.model = parse_decay_model(j.at("model").get<std::string>());
    f.ok = j.at("ok");
    f.amplitude = j.at("amplitude");
    f.amplitude_sigma = j.at("amplitude_sigma");
    f.time_constant_s = j.at("time_constant_s");
    f.time_constant_sigma_s = j.at("time_constant_sigma_s");
    f.covariance = j.at("covariance");
    f.quantile = j.at("quantile");
    return f;
}

} // namespace

std::vector<std::filesystem::path> export_plots(const RunRecord& record, ExportKind kind,
                                                const std::filesystem::path& dir)
{
    const auto& outputs = record.document.at("outputs");
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    json manifest{{"kind", to_string(kind)}, {"record_hash", record.document.value("content_hash", "")},
                  {"files", json::array()}};

    switch (kind) {
    case ExportKind::histogram: {
        auto it = record.sidecars.find("histogram.csv");
        if (it == record.sidecars.end())
            throw ValidationError("record has no histogram; run the analysis stage first");
        written.push_back(write_text(dir / "histogram.csv", it->second));
        const auto& a = outputs.at("analysis");
        manifest["files"].push_back(
            {{"file", "histogram.csv"},
             {"x", "time_s"},
             {"columns",
              {column("time_s", "s", "bin centre after the trigger"),
               column("retrieval_counts", "counts", "storage-and-retrieval run"),
               column("blocked_counts", "counts", "input-blocked run")}},
             {"roi", {a.at("count_summary").at("roi_bins"), record.document.at("config").at("analysis").at("roi")}}});
        break;
    }
    case ExportKind::lifetime: {
        if (!outputs.contains("analysis"))
            throw ValidationError("record has no lifetime series; run the analysis stage first");
        const auto& lt = outputs.at("analysis").at("lifetime");
        const auto fit = fit_from_json(lt.at("fit"));
        const auto holds = lt.at("hold_time_s").get<std::vector<double>>();
        const auto eff = lt.at("efficiency_raw").get<std::vector<double>>();
        const auto unc = lt.at("uncertainty_raw").get<std::vector<double>>();
        const double scale = lt.at("scale_factor");
        std::ostringstream pts;
        pts << "hold_time_s,efficiency,uncertainty\n" << std::setprecision(12);
        for (std::size_t i = 0; i < holds.size(); ++i)
            pts << holds[i] << ',' << eff[i] * scale << ',' << unc[i] * scale << '\n';
        written.push_back(write_text(dir / "lifetime_points.csv", pts.str()));

        std::ostringstream curve;
        curve << "hold_time_s,fit,band_low,band_high\n" << std::setprecision(12);
        const double t1 = holds.empty() ? 0.0 : holds.back();
        for (int i = 0; i <= 200; ++i) {
            const double t = t1 * i / 200.0;
            const auto [lo, hi] = fit.band(t);
            curve << t << ',' << fit.evaluate(t) << ',' << lo << ',' << hi << '\n';
        }
        written.push_back(write_text(dir / "lifetime_fit.csv", curve.str()));
        manifest["scale_factor"] = scale;
        manifest["scale_note"] = lt.at("scale_note");
        manifest["model"] = lt.at("fit").at("model");
        manifest["files"].push_back({{"file", "lifetime_points.csv"},
                                     {"x", "hold_time_s"},
                                     {"columns",
                                      {column("hold_time_s", "s", "storage time"),
                                       column("efficiency", "fraction", "end-to-end efficiency after scaling"),
                                       column("uncertainty", "fraction", "one standard deviation")}}});
        manifest["files"].push_back({{"file", "lifetime_fit.csv"},
                                     {"x", "hold_time_s"},
                                     {"columns",
                                      {column("hold_time_s", "s", "storage time"),
                                       column("fit", "fraction", "fitted decay curve"),
                                       column("band_low", "fraction", "lower edge of the 95 % band"),
                                       column("band_high", "fraction", "upper edge of the 95 % band")}}});
        break;
    }
    case ExportKind::od_curve: {
        auto it = record.sidecars.find("od_curve.csv");
        if (it == record.sidecars.end())
            throw ValidationError("record has no od-curve; set memory.od_curve.optical_depths and run the memory stage");
        written.push_back(write_text(dir / "od_curve.csv", it->second));
        manifest["files"].push_back(
            {{"file", "od_curve.csv"},
             {"x", "optical_depth"},
             {"columns",
              {column("optical_depth", "1", "resonant intensity optical depth d"),
               column("efficiency", "fraction", "optimized storage plus complete forward readout"),
               column("eta_storage", "fraction", "stored excitation per input photon"),
               column("iterations", "1", "optimizer iterations"),
               column("converged", "bool", "1 when the gain fell below the tolerance")}}});
        break;
    }
    }
    written.push_back(write_text(dir / "manifest.json", manifest.dump(2) + "\n"));
    return written;
}

} // namespace vqm
