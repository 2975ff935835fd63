#pragma once

// Internal method-of-lines core shared by the storage/retrieval drivers and
// the control optimizer.

#include "vaporqm/mbe.hpp"

#include <complex>
#include <vector>

namespace vqm::detail {

using cplx = std::complex<double>;

struct MediumModel {
    std::size_t nz = 0;
    double dz = 0.0;
    double kappa = 0.0;           ///< sqrt(d gamma / 2)
    std::vector<cplx> decay;      ///< gamma_v + i Delta_v per class
    std::vector<double> sqrt_w;   ///< sqrt of class weights
    cplx spin_decay;              ///< 1/(2 tau) + i delta
    double max_rate = 0.0;        ///< largest coefficient, without the control
};

MediumModel make_model(const LambdaParams& params, std::size_t z_points);

MediumState zero_state(const MediumModel& model);

/// E(z) = e0 + i kappa * cumulative trapezoid of the collective polarization.
void signal_profile(const MediumModel& model, const MediumState& x, cplx e0, std::vector<cplx>& e);

cplx exit_field(const MediumModel& model, const MediumState& x, cplx e0);

class Rk4Stepper {
public:
    explicit Rk4Stepper(const MediumModel& model);

    /// Advance x by dt. Inputs are the boundary field and half-Rabi coupling at
    /// the start, midpoint and end of the step. Returns E(z=1) at the end.
    cplx step(MediumState& x, double dt, const cplx e0[3], const cplx h[3]);

private:
    void rhs(const MediumState& x, cplx e0, cplx h, MediumState& dx);
    void axpy(const MediumState& x, double a, const MediumState& k, MediumState& out) const;

    const MediumModel& m_;
    MediumState k1_, k2_, k3_, k4_, tmp_;
    std::vector<cplx> e_;
};

/// Throws NumericalError when any amplitude is non-finite.
void check_finite(const MediumState& x, const char* stage);

/// Number of internal substeps per pulse-grid step, honoring options.substeps.
std::size_t substeps_for(const MediumModel& model, const LambdaParams& params, double grid_step_s,
                         double peak_rabi_rad_s, const SolverOptions& options);

} // namespace vqm::detail
