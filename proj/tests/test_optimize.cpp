#include "vaporqm/errors.hpp"
#include "vaporqm/optimize.hpp"
#include "vaporqm/physical_constants.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

using namespace vqm;
using constants::two_pi;

namespace {

LambdaParams resonant(double d)
{
    LambdaParams p;
    p.detuning_rad_s = 0.0;
    p.optical_depth = d;
    p.excited_decay_rad_s = 0.5 * 3.8117e7 + constants::pi * 149.38e6;
    p.spinwave_lifetime_s = std::numeric_limits<double>::infinity();
    return p;
}

PulseShape signal()
{
    return signal_template(TimeGrid::spanning(0.0, 12e-9, 10e-12), 1e-9, 1.0);
}

OptimizerOptions fast(OptimizerMethod m)
{
    OptimizerOptions o;
    o.method = m;
    o.solver.z_points = 61;
    o.max_iterations = 100;
    return o;
}

} // namespace

TEST_CASE("adjoint and finite-difference gradients reach the same optimum")
{
    ControlConstraints c;
    c.knots = 8;
    const auto a = optimize_control(resonant(2.0), signal(), c, fast(OptimizerMethod::time_reversal));
    const auto b = optimize_control(resonant(2.0), signal(), c, fast(OptimizerMethod::gradient_ascent));
    CHECK(a.efficiency > 0.01);
    CHECK(std::abs(a.efficiency - b.efficiency) / a.efficiency < 0.01);
}

TEST_CASE("iterate trace is monotone and ends at the reported efficiency")
{
    ControlConstraints c;
    c.knots = 10;
    const auto r = optimize_control(resonant(5.0), signal(), c, fast(OptimizerMethod::time_reversal));
    REQUIRE(r.trace.size() >= 2);
    for (std::size_t i = 1; i < r.trace.size(); ++i)
        CHECK(r.trace[i] >= r.trace[i - 1]);
    CHECK(r.trace.back() == doctest::Approx(r.efficiency).epsilon(1e-9));
    SolverOptions o;
    o.z_points = 61;
    CHECK(readout_bound_efficiency(resonant(5.0), signal(), r.control, o) ==
          doctest::Approx(r.efficiency).epsilon(1e-6));
    for (const auto& s : r.control.samples)
        CHECK(std::abs(s) <= c.peak_rabi_cap_rad_s * (1.0 + 1e-12));
}

TEST_CASE("optimized efficiency grows with optical depth")
{
    ControlConstraints c;
    c.knots = 8;
    const auto curve = efficiency_vs_od_curve({0.0, 1.0, 3.0, 8.0}, resonant(1.0), signal(), c,
                                              fast(OptimizerMethod::time_reversal));
    REQUIRE(curve.size() == 4);
    CHECK(curve[0].efficiency == doctest::Approx(0.0).epsilon(1e-12));
    for (std::size_t i = 1; i < curve.size(); ++i)
        CHECK(curve[i].efficiency > curve[i - 1].efficiency);
    std::ostringstream s;
    write_od_curve_csv(s, curve);
    CHECK(s.str().rfind("optical_depth,efficiency,eta_storage,iterations,converged\n", 0) == 0);
}

TEST_CASE("optimizer input validation")
{
    ControlConstraints c;
    c.knots = 1;
    CHECK_THROWS_AS(optimize_control(resonant(2.0), signal(), c), ValidationError);
    c.knots = 8;
    auto p = resonant(2.0);
    p.velocity_classes = 5;
    p.doppler_sigma_rad_s = 1e9;
    CHECK_THROWS_AS(optimize_control(p, signal(), c), ValidationError);
    CHECK_THROWS_AS(parse_optimizer_method("newton"), ValidationError);
}
