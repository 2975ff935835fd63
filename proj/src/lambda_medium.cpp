#include "lambda_medium.hpp"

#include "vaporqm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace vqm::detail {

MediumModel make_model(const LambdaParams& p, std::size_t z_points)
{
    if (z_points < 3)
        throw ValidationError("solver needs at least 3 z points");
    p.validate();
    MediumModel m;
    m.nz = z_points;
    m.dz = 1.0 / static_cast<double>(z_points - 1);
    const double gamma = p.excited_decay_rad_s + p.doppler_dephasing_rad_s;
    m.kappa = std::sqrt(p.optical_depth * gamma / 2.0);
    m.spin_decay = cplx(p.spinwave_amplitude_decay(), p.two_photon_detuning_rad_s);

    const std::size_t n = std::max<std::size_t>(1, p.velocity_classes);
    if (n == 1 || p.doppler_sigma_rad_s == 0.0) {
        m.decay = {cplx(gamma, p.detuning_rad_s)};
        m.sqrt_w = {1.0};
    } else {
        // equally spaced classes over +/- 3 sigma with normalized Gaussian weights
        std::vector<double> w(n);
        double total = 0.0;
        for (std::size_t v = 0; v < n; ++v) {
            const double x = -3.0 + 6.0 * static_cast<double>(v) / static_cast<double>(n - 1);
            w[v] = std::exp(-0.5 * x * x);
            total += w[v];
            m.decay.emplace_back(gamma, p.detuning_rad_s + x * p.doppler_sigma_rad_s);
        }
        for (double& wv : w)
            m.sqrt_w.push_back(std::sqrt(wv / total));
    }

    m.max_rate = std::max(gamma, p.optical_depth * gamma);
    for (const auto& d : m.decay)
        m.max_rate = std::max(m.max_rate, std::abs(d.imag()));
    return m;
}

MediumState zero_state(const MediumModel& m)
{
    MediumState x;
    x.polarization.assign(m.decay.size(), Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(m.nz)));
    x.spinwave = x.polarization;
    return x;
}

void signal_profile(const MediumModel& m, const MediumState& x, cplx e0, std::vector<cplx>& e)
{
    e.resize(m.nz);
    const cplx coupling(0.0, m.kappa * 0.5 * m.dz);
    cplx prev = 0.0;
    for (std::size_t v = 0; v < x.polarization.size(); ++v)
        prev += m.sqrt_w[v] * x.polarization[v](0);
    e[0] = e0;
    for (std::size_t j = 1; j < m.nz; ++j) {
        cplx cur = 0.0;
        for (std::size_t v = 0; v < x.polarization.size(); ++v)
            cur += m.sqrt_w[v] * x.polarization[v](static_cast<Eigen::Index>(j));
        e[j] = e[j - 1] + coupling * (prev + cur);
        prev = cur;
    }
}

cplx exit_field(const MediumModel& m, const MediumState& x, cplx e0)
{
    cplx sum = 0.0;
    for (std::size_t v = 0; v < x.polarization.size(); ++v) {
        const auto& p = x.polarization[v];
        sum += m.sqrt_w[v] * (p.sum() - 0.5 * (p(0) + p(p.size() - 1)));
    }
    return e0 + cplx(0.0, m.kappa * m.dz) * sum;
}

Rk4Stepper::Rk4Stepper(const MediumModel& model)
    : m_(model), k1_(zero_state(model)), k2_(k1_), k3_(k1_), k4_(k1_), tmp_(k1_)
{
}

void Rk4Stepper::rhs(const MediumState& x, cplx e0, cplx h, MediumState& dx)
{
    signal_profile(m_, x, e0, e_);
    const cplx i(0.0, 1.0);
    const cplx ih = i * h;
    const cplx ihc = i * std::conj(h);
    for (std::size_t v = 0; v < x.polarization.size(); ++v) {
        const cplx drive = i * m_.kappa * m_.sqrt_w[v];
        const cplx decay = m_.decay[v];
        const auto& p = x.polarization[v];
        const auto& s = x.spinwave[v];
        auto& dp = dx.polarization[v];
        auto& ds = dx.spinwave[v];
        for (Eigen::Index j = 0; j < p.size(); ++j) {
            dp(j) = -decay * p(j) + drive * e_[static_cast<std::size_t>(j)] + ih * s(j);
            ds(j) = -m_.spin_decay * s(j) + ihc * p(j);
        }
    }
}

void Rk4Stepper::axpy(const MediumState& x, double a, const MediumState& k, MediumState& out) const
{
    for (std::size_t v = 0; v < x.polarization.size(); ++v) {
        out.polarization[v] = x.polarization[v] + a * k.polarization[v];
        out.spinwave[v] = x.spinwave[v] + a * k.spinwave[v];
    }
}

cplx Rk4Stepper::step(MediumState& x, double dt, const cplx e0[3], const cplx h[3])
{
    rhs(x, e0[0], h[0], k1_);
    axpy(x, 0.5 * dt, k1_, tmp_);
    rhs(tmp_, e0[1], h[1], k2_);
    axpy(x, 0.5 * dt, k2_, tmp_);
    rhs(tmp_, e0[1], h[1], k3_);
    axpy(x, dt, k3_, tmp_);
    rhs(tmp_, e0[2], h[2], k4_);
    const double c = dt / 6.0;
    for (std::size_t v = 0; v < x.polarization.size(); ++v) {
        x.polarization[v] += c * (k1_.polarization[v] + 2.0 * k2_.polarization[v] + 2.0 * k3_.polarization[v] +
                                  k4_.polarization[v]);
        x.spinwave[v] += c * (k1_.spinwave[v] + 2.0 * k2_.spinwave[v] + 2.0 * k3_.spinwave[v] + k4_.spinwave[v]);
    }
    return exit_field(m_, x, e0[2]);
}

void check_finite(const MediumState& x, const char* stage)
{
    for (std::size_t v = 0; v < x.polarization.size(); ++v) {
        if (!x.polarization[v].allFinite() || !x.spinwave[v].allFinite())
            throw NumericalError(std::string("non-finite atomic amplitudes during ") + stage +
                                 " (velocity class " + std::to_string(v) + ")");
    }
}

std::size_t substeps_for(const MediumModel& model, const LambdaParams& params, double grid_step_s,
                         double peak_rabi_rad_s, const SolverOptions& options)
{
    (void)model;
    const double dt_max = max_stable_step(params, peak_rabi_rad_s, options.stability_factor);
    if (options.substeps == 0) {
        const double n = std::ceil(grid_step_s / dt_max - 1e-12);
        if (!(n <= 1e5))
            throw NumericalError("problem too stiff for the pulse grid: " + std::to_string(n) +
                                 " substeps per step needed");
        return std::max<std::size_t>(1, static_cast<std::size_t>(n));
    }
    const double dt = grid_step_s / static_cast<double>(options.substeps);
    if (dt > dt_max * (1.0 + 1e-12))
        throw NumericalError("step-size violation: dt = " + std::to_string(dt) + " s exceeds stability limit " +
                             std::to_string(dt_max) + " s");
    return options.substeps;
}

} // namespace vqm::detail
