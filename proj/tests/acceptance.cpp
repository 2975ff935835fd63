#include "vaporqm/atom.hpp"
#include "vaporqm/filters.hpp"
#include "vaporqm/mbe.hpp"
#include "vaporqm/optimize.hpp"
#include "vaporqm/photon_stats.hpp"
#include "vaporqm/physical_constants.hpp"
#include "vaporqm/pipeline.hpp"
#include "vaporqm/transitions.hpp"
#include "vaporqm/zeeman.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <limits>
#include <random>
#include <string>

using namespace vqm;
using constants::two_pi;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Outcome count_arithmetic()
{
    const auto s = count_summary(4.46e5, 4.28e4, 7325.0 / 40.0, 40.0);
    FomInputs in;
    in.eta_det_hbt = {0.70, 0.04};
    in.n_triggers = 1.81e7;
    const auto f = figures_of_merit(s, in);
    const bool ok = std::abs(f.snr.value - 7.90) <= 0.02 && std::abs(100 * f.eta_e2e.value - 3.12) <= 0.02 &&
                    std::abs(f.mu1.value - 0.089) <= 0.002 && std::abs(s.n_noise - 50125.0) < 1e-6;
    return {ok, fmt("N_noise=%.1f SNR=%.4f+-%.2f eta_e2e=%.4f%%+-%.2f mu1=%.4f+-%.3f", s.n_noise, f.snr.value,
                    f.snr.sigma, 100 * f.eta_e2e.value, 100 * f.eta_e2e.sigma, f.mu1.value, f.mu1.sigma)};
}

double g_s_splitting(const AtomSpec& atom, double b)
{
    const auto lv = level_structure(atom, b);
    return find_state(lv.ground, +1, atom.two_i).energy_hz - find_state(lv.ground, -1, atom.two_i).energy_hz;
}

Outcome level_structure_check()
{
    const auto atom = load_atom_by_name("Rb87");
    const double split = g_s_splitting(atom, 1.06);

    const double i = atom.nuclear_spin(), a = atom.ground.hyperfine_a_hz, dhfs = a * (i + 0.5);
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> field(0.0, 2.0);
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
        const double b = field(rng);
        const double mu = constants::bohr_magneton_hz_per_tesla * b;
        const double x = (atom.ground.g_j - atom.g_i) * mu / dhfs;
        std::vector<double> oracle;
        for (int two_m = -atom.two_i - 1; two_m <= atom.two_i + 1; two_m += 2) {
            const double m = 0.5 * two_m;
            if (std::abs(two_m) == atom.two_i + 1) {
                oracle.push_back(a * i / 2.0 + (two_m > 0 ? 1 : -1) * mu * (atom.ground.g_j / 2.0 + atom.g_i * i));
                continue;
            }
            const double root = std::sqrt(1.0 + 4.0 * m * x / (2.0 * i + 1.0) + x * x);
            for (double sgn : {1.0, -1.0})
                oracle.push_back(-dhfs / (2.0 * (2.0 * i + 1.0)) + atom.g_i * mu * m + sgn * dhfs / 2.0 * root);
        }
        std::sort(oracle.begin(), oracle.end());
        const auto states = diagonalize_manifold(build_hamiltonian(atom, Manifold::ground, b));
        for (std::size_t n = 0; n < oracle.size(); ++n)
            worst = std::max(worst, std::abs(states[n].energy_hz - oracle[n]) / std::max(std::abs(oracle[n]), dhfs));
    }

    double lo = 1.0, hi = 1.2;
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (g_s_splitting(atom, mid) < 35.55e9 ? lo : hi) = mid;
    }
    const bool ok = std::abs(split - 35.55e9) <= 0.2e9 && worst <= 1e-9;
    return {ok, fmt("splitting(1.06 T)=%.4f GHz (target 35.55+-0.2), 35.55 GHz reached at B=%.4f T, "
                    "Breit-Rabi max rel dev=%.2e over 20 fields",
                    split / 1e9, 0.5 * (lo + hi), worst)};
}

ScenarioConfig operating_point_scenario()
{
    return load_scenario(bundled_scenario("paper-operating-point"));
}

Outcome optical_depth()
{
    const auto rec = run_pipeline(operating_point_scenario(), {Stage::spectrum});
    if (!rec.ok())
        return {false, rec.failure_message()};
    const auto& s = rec.document["outputs"]["spectrum"];
    const double od = s["signal_od_unpumped"], line = s["signal_line_od_unpumped"];
    const double n = s["manifold_density_cm3"];
    const bool ok = od >= 1.0 && od <= 2.5 && line >= 1.0 && line <= 2.5 && std::abs(n / 5.5e11 - 1.0) <= 0.15;
    return {ok, fmt("signal OD (spectrum)=%.3f, signal line alone=%.3f, density=%.3e cm^-3 (5.5e11+-15%%)", od, line,
                    n)};
}

Outcome gorshkov_bound()
{
    const auto cfg = operating_point_scenario();
    LambdaParams p;
    p.detuning_rad_s = two_pi * cfg.memory.od_curve.detuning_hz;
    p.optical_depth = 5.0;
    p.excited_decay_rad_s = 0.5 * load_atom_by_name(cfg.atom.species).natural_linewidth_rad_s +
                            constants::pi * buffer_broadening_hz(load_atom_by_name(cfg.atom.species),
                                                                 cfg.cell.buffer_gas, cfg.cell.buffer_pressure_mbar);
    p.spinwave_lifetime_s = std::numeric_limits<double>::infinity();
    const auto sig = signal_template(TimeGrid::spanning(0.0, cfg.memory.storage_window_s, cfg.memory.od_curve.time_step_s),
                                     cfg.pulses.signal.start_s, 1.0, cfg.pulses.signal.rise_s, cfg.pulses.signal.decay_s,
                                     cfg.pulses.signal.window_s);
    ControlConstraints c;
    c.peak_rabi_cap_rad_s = two_pi * cfg.memory.od_curve.peak_rabi_cap_hz;
    c.knots = static_cast<std::size_t>(cfg.memory.od_curve.knots);
    OptimizerOptions o;
    o.solver.z_points = static_cast<std::size_t>(cfg.memory.od_curve.z_points);
    o.max_iterations = static_cast<std::size_t>(cfg.memory.od_curve.max_iterations);
    o.tolerance = cfg.memory.od_curve.tolerance;
    const auto r = optimize_control(p, sig, c, o);
    bool monotone = true;
    for (std::size_t k = 1; k < r.trace.size(); ++k)
        monotone = monotone && r.trace[k] >= r.trace[k - 1];
    const bool ok = r.efficiency < 0.30 && monotone && r.trace.size() >= 2;
    return {ok, fmt("d=5 optimized forward efficiency=%.4f (<0.30), %zu iterations, trace %s from %.4f", r.efficiency,
                    r.iterations, monotone ? "monotone" : "NOT monotone", r.trace.front())};
}

Outcome etalon()
{
    const EtalonSpec e{71.1e9, 1.19e9, 1.0, 0.0};
    const double db = to_db(etalon_transmission(e, 35.55e9));
    FilterChain chain;
    chain.broadband.reset();
    chain.etalons = {e, e, e};
    double worst = 0.0;
    for (double nu : {0.3e9, 5e9, 20e9, 35.55e9, 35.09e9, 50e9}) {
        const double sum = 3.0 * to_db(etalon_transmission(e, nu));
        worst = std::max(worst, std::abs(to_db(chain.spectral_transmission(nu)) - sum));
    }
    const bool ok = std::abs(db + 31.6) <= 0.1 && std::abs(db + 33.0) <= 2.0 && worst <= 1e-9;
    return {ok, fmt("Airy at FSR/2=%.3f dB (model -31.6+-0.1, measured -33+-1), 3-stack dB-sum dev=%.1e", db, worst)};
}

Outcome lifetime()
{
    const std::vector<double> holds{20e-9, 80e-9, 160e-9, 240e-9, 320e-9, 400e-9, 480e-9};
    const double tau = 224e-9, amp = 0.035, sigma = 0.0007;
    std::mt19937_64 rng(77);
    std::normal_distribution<double> unit(0.0, 1.0);
    int covered = 0;
    double width = 0.0, one_sigma = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        LifetimeSeries s;
        for (double t : holds) {
            s.hold_time_s.push_back(t);
            s.efficiency.push_back(amp * std::exp(-t / tau) + sigma * unit(rng));
            s.uncertainty.push_back(sigma);
        }
        const auto f = fit_lifetime(s, DecayModel::exponential);
        if (f.ok && f.ci_low_s <= tau && tau <= f.ci_high_s)
            ++covered;
        width += 0.5 * (f.ci_high_s - f.ci_low_s) / 100.0;
        one_sigma += f.time_constant_sigma_s / 100.0;
    }

    std::uniform_real_distribution<double> tc(100e-9, 400e-9), a(0.01, 0.05);
    int exp_wins = 0, gauss_wins = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const double t0 = tc(rng), a0 = a(rng);
        LifetimeSeries e, g;
        for (double t : holds) {
            for (auto* s : {&e, &g}) {
                s->hold_time_s.push_back(t);
                s->uncertainty.push_back(0.0);
            }
            e.efficiency.push_back(a0 * std::exp(-t / t0));
            g.efficiency.push_back(a0 * std::exp(-t * t / (2.0 * t0 * t0)));
        }
        if (fit_lifetime(e, DecayModel::exponential).chi_squared < fit_lifetime(e, DecayModel::gaussian).chi_squared)
            ++exp_wins;
        if (fit_lifetime(g, DecayModel::gaussian).chi_squared < fit_lifetime(g, DecayModel::exponential).chi_squared)
            ++gauss_wins;
    }
    const bool ok = covered >= 90 && exp_wins == 100 && gauss_wins == 100;
    return {ok, fmt("CI coverage %d/100 (mean sigma %.1f ns, 95%% half-width %.1f ns), model selection exp %d/100, "
                    "gaussian %d/100",
                    covered, one_sigma * 1e9, width * 1e9, exp_wins, gauss_wins)};
}

Outcome internal()
{
    const double eta = internal_efficiency(0.0312, 0.195, 80e-9, 224e-9);
    return {eta >= 0.21 && eta <= 0.27, fmt("eta_int(0)=%.2f%% (21..27%%)", 100 * eta)};
}

LambdaParams operating_point()
{
    LambdaParams p;
    p.detuning_rad_s = -two_pi * 750e6;
    p.optical_depth = 2.0;
    const auto atom = load_atom_by_name("Rb87");
    p.excited_decay_rad_s = 0.5 * atom.natural_linewidth_rad_s + constants::pi * buffer_broadening_hz(atom, "Ar", 11.0);
    p.spinwave_lifetime_s = 224e-9;
    return p;
}

double trapz(const Eigen::VectorXd& v, double h)
{
    return v.size() < 2 ? 0.0 : h * (v.sum() - 0.5 * (v(0) + v(v.size() - 1)));
}

Outcome solver_properties()
{
    const auto p = operating_point();
    auto pulses = [](double dt, double photons) {
        const auto g = TimeGrid::spanning(0.0, 12e-9, dt);
        const auto r = TimeGrid::spanning(0.0, 10e-9, dt);
        return std::tuple{signal_template(g, 1e-9, photons), gaussian_control(g, 2.5e-9, 3.8e-9, two_pi * 683e6),
                          gaussian_control(r, 2.5e-9, 3.8e-9, two_pi * 683e6)};
    };

    // linearity
    auto [s1, c1, r1] = pulses(5e-12, 0.97);
    auto [s9, c9, r9] = pulses(5e-12, 9 * 0.97);
    const auto a = simulate_storage(p, s1, c1);
    const auto b = simulate_storage(p, s9, c9);
    double lin = 0.0;
    for (std::size_t j = 0; j < a.result.spinwave_snapshot.size(); ++j) {
        const auto x = b.result.spinwave_snapshot[j], y = 3.0 * a.result.spinwave_snapshot[j];
        if (std::abs(x) > 0.0)
            lin = std::max(lin, std::abs(x - y) / std::abs(x));
    }
    const double e1 = simulate_retrieval(a.fields, p, r1, 0.0).eta_internal_total;
    lin = std::max(lin, std::abs(simulate_retrieval(b.fields, p, r9, 0.0).eta_internal_total - e1) / e1);

    // convergence
    auto [sf, cf, rf] = pulses(2.5e-12, 0.97);
    SolverOptions fine;
    fine.z_points = 401;
    fine.stability_factor = 0.05;
    const double e2 = simulate_retrieval(simulate_storage(p, sf, cf, fine).fields, p, rf, 0.0, fine).eta_internal_total;
    const double conv = std::abs(e2 - e1) / e2;

    // bookkeeping
    auto q = p;
    q.spinwave_lifetime_s = std::numeric_limits<double>::infinity();
    SolverOptions rec;
    rec.record_fields = true;
    const auto st = simulate_storage(q, s1, c1, rec);
    const auto& f = st.fields;
    const double dz = f.z[1] - f.z[0];
    Eigen::VectorXd diss(f.polarization.rows());
    for (Eigen::Index n = 0; n < diss.size(); ++n)
        diss(n) = 2.0 * q.excited_decay_rad_s * trapz(f.polarization.row(n).cwiseAbs2().transpose(), dz);
    const double n_in = st.result.input_photons;
    const double deficit = std::abs(n_in - st.result.leaked_pulse.energy() - f.final_state.spinwave_excitation() -
                                    f.final_state.polarization_excitation() - trapz(diss, f.t.step_s)) /
                           n_in;

    // Beer-Lambert
    double beer = 0.0;
    for (double d : {1.0, 2.0}) {
        for (double x : {0.0, 1.0, 3.0}) {
            auto r = p;
            r.optical_depth = d;
            r.detuning_rad_s = x * r.excited_decay_rad_s;
            const auto g = TimeGrid::spanning(0.0, 300e-9, 50e-12);
            const auto sig = normalized(gaussian_control(g, 150e-9, 50e-9, 1.0), 1.0);
            const auto off = gaussian_control(g, 150e-9, 50e-9, 0.0);
            SolverOptions o;
            o.z_points = 101;
            const double t = simulate_storage(r, sig, off, o).result.leaked_pulse.energy();
            const double oracle = std::exp(-d / (1.0 + x * x));
            beer = std::max(beer, std::abs(t - oracle) / oracle);
        }
    }
    const bool ok = lin <= 1e-9 && conv < 5e-3 && deficit < 0.02 && beer <= 0.01;
    return {ok, fmt("linearity dev=%.1e, refinement change=%.3f%%, bookkeeping deficit=%.3f%%, Beer-Lambert dev=%.3f%%",
                    lin, 100 * conv, 100 * deficit, 100 * beer)};
}

} // namespace

int main()
{
    const std::pair<const char*, std::function<Outcome()>> criteria[] = {
        {"count arithmetic golden values", count_arithmetic},
        {"level structure at 1.06 T", level_structure_check},
        {"optical depth and density", optical_depth},
        {"forward-retrieval bound at d=5", gorshkov_bound},
        {"etalon suppression", etalon},
        {"lifetime fit pipeline", lifetime},
        {"internal-efficiency reconstruction", internal},
        {"solver property suite", solver_properties},
    };
    int failed = 0;
    int index = 0;
    for (const auto& [name, check] : criteria) {
        ++index;
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += o.pass ? 0 : 1;
        std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", index, name, o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
