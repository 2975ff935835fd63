#pragma once

#include "vaporqm/mbe.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace vqm {

enum class OptimizerMethod {
    time_reversal,   ///< gradient from the adjoint (time-reversed) propagation
    gradient_ascent, ///< central finite-difference gradient
};

OptimizerMethod parse_optimizer_method(std::string_view name);
std::string_view to_string(OptimizerMethod method);

/// The control is piecewise linear between `knots` complex nodes spread
/// evenly over [window_start_s, window_end_s] and zero outside. Node
/// magnitudes stay below the cap, so |Omega(t)| <= cap everywhere.
struct ControlConstraints {
    double peak_rabi_cap_rad_s = 2.0 * 3.14159265358979323846 * 2e9;
    double window_start_s = 0.0;
    double window_end_s = 0.0; ///< <= start means the whole signal grid
    std::size_t knots = 16;
};

struct OptimizerOptions {
    OptimizerMethod method = OptimizerMethod::time_reversal;
    std::size_t max_iterations = 200;
    double tolerance = 1e-4;         ///< stop after three accepted iterations each gaining less than this fraction
    double initial_fraction = 0.3;   ///< peak of the starting Gaussian control, as a fraction of the cap
    std::vector<std::complex<double>> initial_knots; ///< empty: Gaussian start on the signal centroid
    double fd_step = 1e-5;
    SolverOptions solver{101, 0, 0.1, false};
};

struct OptimizationResult {
    PulseShape control;
    double efficiency = 0.0; ///< storage followed by complete readout, relative to input photons
    double eta_storage = 0.0;
    std::vector<std::complex<double>> knots;
    std::vector<double> trace; ///< efficiency after each accepted iterate, starting point first
    std::size_t iterations = 0;
    bool converged = false;
    std::string warning;
};

/// Objective used by the optimizer: storage with `control`, then complete
/// readout (no decay) in params.retrieval direction. Single velocity class.
double readout_bound_efficiency(const LambdaParams& params, const PulseShape& signal_in, const PulseShape& control,
                                const SolverOptions& options = {});

/// Control on the signal grid built from complex node values.
PulseShape control_from_knots(const TimeGrid& grid, const ControlConstraints& constraints,
                              const std::vector<std::complex<double>>& knots);

OptimizationResult optimize_control(const LambdaParams& params, const PulseShape& signal_in,
                                    const ControlConstraints& constraints, const OptimizerOptions& options = {});

struct OdCurvePoint {
    double optical_depth = 0.0;
    double efficiency = 0.0;
    double eta_storage = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
};

/// optimize_control for each optical depth (other parameters fixed). Each
/// point also tries the previous point's optimum as a start and keeps the better.
std::vector<OdCurvePoint> efficiency_vs_od_curve(const std::vector<double>& optical_depths, const LambdaParams& params,
                                                 const PulseShape& signal_in, const ControlConstraints& constraints,
                                                 const OptimizerOptions& options = {});

void write_od_curve_csv(std::ostream& out, const std::vector<OdCurvePoint>& curve);

} // namespace vqm
