#include "vaporqm/errors.hpp"
#include "vaporqm/mbe.hpp"
#include "vaporqm/physical_constants.hpp"
#include "vaporqm/pulse.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace vqm;
using constants::two_pi;

namespace {

LambdaParams operating_point()
{
    LambdaParams p;
    p.detuning_rad_s = -two_pi * 750e6;
    p.optical_depth = 2.0;
    p.excited_decay_rad_s = 0.5 * 3.8117e7 + constants::pi * 149.38e6;
    p.spinwave_lifetime_s = 224e-9;
    return p;
}

struct Setup {
    PulseShape signal;
    PulseShape control;
    PulseShape readout;
};

Setup pulses(double dt = 5e-12, double photons = 0.97)
{
    const auto g = TimeGrid::spanning(0.0, 12e-9, dt);
    const auto r = TimeGrid::spanning(0.0, 10e-9, dt);
    return {signal_template(g, 1e-9, photons), gaussian_control(g, 2.5e-9, 3.8e-9, two_pi * 683e6),
            gaussian_control(r, 2.5e-9, 3.8e-9, two_pi * 683e6)};
}

double trapz(const Eigen::VectorXd& v, double h)
{
    if (v.size() < 2)
        return 0.0;
    return h * (v.sum() - 0.5 * (v(0) + v(v.size() - 1)));
}

} // namespace

TEST_CASE("storage is linear in the signal amplitude")
{
    const auto p = operating_point();
    const auto a = pulses(5e-12, 0.97);
    const auto b = pulses(5e-12, 9.0 * 0.97);
    SolverOptions o;
    const auto ra = simulate_storage(p, a.signal, a.control, o);
    const auto rb = simulate_storage(p, b.signal, b.control, o);
    CHECK(rb.result.eta_storage == doctest::Approx(ra.result.eta_storage).epsilon(1e-9));
    for (std::size_t j = 0; j < ra.result.spinwave_snapshot.size(); j += 10)
        CHECK(std::abs(rb.result.spinwave_snapshot[j] - 3.0 * ra.result.spinwave_snapshot[j]) <=
              1e-9 * std::abs(rb.result.spinwave_snapshot[j]) + 1e-300);
    const auto qa = simulate_retrieval(ra.fields, p, a.readout, 80e-9, o);
    const auto qb = simulate_retrieval(rb.fields, p, b.readout, 80e-9, o);
    CHECK(qb.eta_internal_total == doctest::Approx(qa.eta_internal_total).epsilon(1e-9));
}

TEST_CASE("efficiency is invariant under a global phase of the signal")
{
    const auto p = operating_point();
    auto s = pulses();
    const auto r0 = simulate_storage(p, s.signal, s.control);
    const auto r1 = simulate_storage(p, s.signal.scaled(std::polar(1.0, 1.1)), s.control);
    CHECK(r1.result.eta_storage == doctest::Approx(r0.result.eta_storage).epsilon(1e-12));
}

TEST_CASE("operating-point efficiency converges under grid refinement")
{
    const auto p = operating_point();
    auto run = [&](double dt, std::size_t nz) {
        const auto s = pulses(dt);
        SolverOptions o;
        o.z_points = nz;
        o.stability_factor = dt < 4e-12 ? 0.05 : 0.1;
        const auto st = simulate_storage(p, s.signal, s.control, o);
        return simulate_retrieval(st.fields, p, s.readout, 0.0, o).eta_internal_total;
    };
    const double coarse = run(5e-12, 201);
    const double fine = run(2.5e-12, 401);
    CHECK(std::abs(fine - coarse) / fine < 5e-3);
}

TEST_CASE("excitation bookkeeping closes without spin-wave decay")
{
    auto p = operating_point();
    p.spinwave_lifetime_s = std::numeric_limits<double>::infinity();
    const auto s = pulses();
    SolverOptions o;
    o.record_fields = true;
    const auto st = simulate_storage(p, s.signal, s.control, o);
    const auto& f = st.fields;
    const double dz = f.z[1] - f.z[0];
    const Eigen::Index nt = f.polarization.rows();
    Eigen::VectorXd dissipated(nt);
    for (Eigen::Index n = 0; n < nt; ++n)
        dissipated(n) = 2.0 * p.excited_decay_rad_s * trapz(f.polarization.row(n).cwiseAbs2().transpose(), dz);
    const double lost = trapz(dissipated, f.t.step_s);
    const double n_in = st.result.input_photons;
    const double n_out = st.result.leaked_pulse.energy();
    const double held = f.final_state.spinwave_excitation() + f.final_state.polarization_excitation();
    const double deficit = std::abs(n_in - n_out - held - lost) / n_in;
    CHECK(deficit < 0.02);
}

TEST_CASE("without control the medium follows Beer-Lambert")
{
    for (double d : {1.0, 2.0}) {
        for (double detune_in_gamma : {0.0, 1.0, 3.0}) {
            auto p = operating_point();
            p.optical_depth = d;
            p.detuning_rad_s = detune_in_gamma * p.excited_decay_rad_s;
            const auto g = TimeGrid::spanning(0.0, 300e-9, 50e-12);
            PulseShape sig = gaussian_control(g, 150e-9, 50e-9, 1.0);
            sig = normalized(sig, 1.0);
            const PulseShape none = gaussian_control(g, 150e-9, 50e-9, 0.0);
            SolverOptions o;
            o.z_points = 101;
            const auto st = simulate_storage(p, sig, none, o);
            const double l = 1.0 / (1.0 + detune_in_gamma * detune_in_gamma);
            const double expected = std::exp(-d * l);
            CHECK(st.result.leaked_pulse.energy() == doctest::Approx(expected).epsilon(0.01));
            CHECK(st.result.eta_storage < 1e-12);
        }
    }
}

TEST_CASE("zero optical depth transmits the signal unchanged")
{
    auto p = operating_point();
    p.optical_depth = 0.0;
    const auto s = pulses();
    const auto st = simulate_storage(p, s.signal, s.control);
    CHECK(st.result.eta_storage == doctest::Approx(0.0));
    CHECK(st.result.leaked_pulse.energy() == doctest::Approx(s.signal.energy()).epsilon(1e-9));
}

TEST_CASE("free hold decays the stored excitation as exp(-t/tau)")
{
    const auto p = operating_point();
    const auto s = pulses();
    const auto st = simulate_storage(p, s.signal, s.control);
    const auto r = simulate_retrieval(st.fields, p, s.readout, 80e-9);
    CHECK(r.decay_factor == doctest::Approx(std::exp(-80e-9 / 224e-9)).epsilon(1e-9));
    const auto r0 = simulate_retrieval(st.fields, p, s.readout, 0.0);
    CHECK(r.eta_internal_total / r0.eta_internal_total == doctest::Approx(r.decay_factor).epsilon(0.02));
}

TEST_CASE("complete readout kernel agrees with a long strong readout")
{
    auto p = operating_point();
    p.optical_depth = 5.0;
    const auto s = pulses();
    const auto st = simulate_storage(p, s.signal, s.control);
    auto q = p;
    q.detuning_rad_s = 0.0;
    q.spinwave_lifetime_s = std::numeric_limits<double>::infinity();
    const auto g = TimeGrid::spanning(0.0, 80e-9, 10e-12);
    PulseShape flat = gaussian_control(g, 40e-9, 1.0, 0.0);
    for (std::size_t n = 0; n < g.size; ++n)
        flat.samples[n] = two_pi * 300e6 * std::min(1.0, g.at(n) / 2e-9);
    const auto r = simulate_retrieval(st.fields, q, flat, 30e-9);
    const auto& spin = st.fields.final_state.spinwave[0];
    const double kernel = complete_readout_efficiency(st.fields.z, spin, q.optical_depth);
    CHECK(r.eta_retrieval == doctest::Approx(kernel).epsilon(2e-3));

    // nothing is emitted at d -> 0 and the efficiency grows toward 1 with d
    Eigen::VectorXcd flat_s = Eigen::VectorXcd::Ones(static_cast<Eigen::Index>(st.fields.z.size()));
    CHECK(complete_readout_efficiency(st.fields.z, flat_s, 1e-6) == doctest::Approx(0.0).epsilon(1e-5));
    double last = 0.0;
    for (double d : {1.0, 5.0, 20.0, 200.0}) {
        const double e = complete_readout_efficiency(st.fields.z, flat_s, d);
        CHECK(e > last);
        CHECK(e < 1.0);
        last = e;
    }
}

TEST_CASE("leakage readout scales with the square of its amplitude when weak")
{
    const auto p = operating_point();
    const auto s = pulses();
    const auto st = simulate_storage(p, s.signal, s.control);
    const auto hg = TimeGrid::spanning(0.0, 80e-9, 20e-12);
    const auto w = decaying_sinusoid(hg, 0.0, two_pi * 10e6, 250e6, 20e-9);
    const double f1 = apply_control_leakage(st.fields, p, w).result.unintentional_readout_fraction;
    const double f2 = apply_control_leakage(st.fields, p, w.scaled(2.0)).result.unintentional_readout_fraction;
    CHECK(f1 > 0.0);
    CHECK(f2 / f1 == doctest::Approx(4.0).epsilon(0.02));
    const double scale = calibrate_leakage_scale(st.fields, p, w, 0.192);
    CHECK(apply_control_leakage(st.fields, p, w.scaled(scale)).result.unintentional_readout_fraction ==
          doctest::Approx(0.192).epsilon(1e-4));
}

TEST_CASE("inputs are validated")
{
    auto p = operating_point();
    const auto s = pulses();
    p.optical_depth = -1.0;
    CHECK_THROWS_AS(simulate_storage(p, s.signal, s.control), ValidationError);
    p = operating_point();
    CHECK_THROWS_AS(simulate_storage(p, s.signal, s.readout), ValidationError);
    PulseShape bad = s.signal;
    bad.samples[3] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(simulate_storage(p, bad, s.control), ValidationError);
}

TEST_CASE("resolved Doppler classes reduce to the single-class model for a narrow distribution")
{
    auto p = operating_point();
    const auto s = pulses();
    SolverOptions o;
    o.z_points = 101;
    const double single = simulate_storage(p, s.signal, s.control, o).result.eta_storage;
    p.velocity_classes = 9;
    p.doppler_sigma_rad_s = 1e3;
    const double multi = simulate_storage(p, s.signal, s.control, o).result.eta_storage;
    CHECK(multi == doctest::Approx(single).epsilon(1e-4));
}
