#include "vaporqm/mbe.hpp"

#include "lambda_medium.hpp"
#include "vaporqm/errors.hpp"

#include <boost/math/special_functions/bessel.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace vqm {

using detail::cplx;

void LambdaParams::validate() const
{
    if (!(optical_depth >= 0.0) || !std::isfinite(optical_depth))
        throw ValidationError("optical depth must be finite and non-negative");
    if (!(excited_decay_rad_s > 0.0) || !std::isfinite(excited_decay_rad_s))
        throw ValidationError("excited-state decay must be positive");
    if (!(spinwave_lifetime_s > 0.0))
        throw ValidationError("spin-wave lifetime must be positive");
    if (!std::isfinite(detuning_rad_s) || !std::isfinite(two_photon_detuning_rad_s))
        throw ValidationError("detunings must be finite");
    if (doppler_dephasing_rad_s < 0.0 || doppler_sigma_rad_s < 0.0)
        throw ValidationError("Doppler widths must be non-negative");
    if (velocity_classes == 0)
        throw ValidationError("need at least one velocity class");
}

double LambdaParams::spinwave_amplitude_decay() const
{
    return std::isinf(spinwave_lifetime_s) ? 0.0 : 0.5 / spinwave_lifetime_s;
}

double max_stable_step(const LambdaParams& params, double peak_rabi_rad_s, double stability_factor)
{
    const auto model = detail::make_model(params, 3);
    const double rate = std::max(model.max_rate, std::abs(peak_rabi_rad_s));
    return stability_factor / rate;
}

Eigen::VectorXd trapezoid_weights(std::size_t n)
{
    if (n < 2)
        throw ValidationError("need at least two grid points");
    Eigen::VectorXd w = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n - 1));
    w(0) *= 0.5;
    w(static_cast<Eigen::Index>(n - 1)) *= 0.5;
    return w;
}

double MediumState::spinwave_excitation() const
{
    double sum = 0.0;
    for (const auto& s : spinwave)
        sum += trapezoid_weights(static_cast<std::size_t>(s.size())).dot(s.cwiseAbs2());
    return sum;
}

double MediumState::polarization_excitation() const
{
    double sum = 0.0;
    for (const auto& p : polarization)
        sum += trapezoid_weights(static_cast<std::size_t>(p.size())).dot(p.cwiseAbs2());
    return sum;
}

Eigen::VectorXcd MediumState::collective_spinwave(const LambdaParams& params) const
{
    const auto model = detail::make_model(params, static_cast<std::size_t>(spinwave.front().size()));
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(spinwave.front().size());
    for (std::size_t v = 0; v < spinwave.size(); ++v)
        out += model.sqrt_w[v] * spinwave[v];
    return out;
}

namespace {

struct Drive {
    const PulseShape* signal = nullptr; ///< boundary field at z = 0, may be null
    const PulseShape* control = nullptr;
};

struct Propagation {
    PulseShape exit;   ///< E(z=1, t) on the drive grid
    FieldGrid fields;
};

std::vector<double> z_grid(std::size_t n)
{
    std::vector<double> z(n);
    for (std::size_t j = 0; j < n; ++j)
        z[j] = static_cast<double>(j) / static_cast<double>(n - 1);
    return z;
}

Eigen::VectorXcd to_eigen(const std::vector<cplx>& v)
{
    return Eigen::Map<const Eigen::VectorXcd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Propagation propagate(const LambdaParams& params, const detail::MediumModel& model, MediumState state,
                      const TimeGrid& grid, Drive drive, const SolverOptions& options, const char* stage)
{
    const double peak = drive.control ? drive.control->peak() : 0.0;
    const std::size_t sub = detail::substeps_for(model, params, grid.step_s, peak, options);
    const double dt = grid.step_s / static_cast<double>(sub);

    auto boundary = [&](double t) { return drive.signal ? drive.signal->at(t) : cplx(0.0); };
    auto coupling = [&](double t) { return drive.control ? 0.5 * drive.control->at(t) : cplx(0.0); };

    Propagation out;
    out.exit.grid = grid;
    out.exit.samples.resize(grid.size);
    out.fields.z = z_grid(model.nz);
    out.fields.t = grid;

    const auto nz = static_cast<Eigen::Index>(model.nz);
    const auto nt = static_cast<Eigen::Index>(grid.size);
    std::vector<cplx> e_profile;
    auto record = [&](std::size_t n, cplx e0) {
        if (!options.record_fields)
            return;
        detail::signal_profile(model, state, e0, e_profile);
        out.fields.signal.row(static_cast<Eigen::Index>(n)) = to_eigen(e_profile).transpose();
        Eigen::VectorXcd p = Eigen::VectorXcd::Zero(nz), s = Eigen::VectorXcd::Zero(nz);
        for (std::size_t v = 0; v < state.polarization.size(); ++v) {
            p += model.sqrt_w[v] * state.polarization[v];
            s += model.sqrt_w[v] * state.spinwave[v];
        }
        out.fields.polarization.row(static_cast<Eigen::Index>(n)) = p.transpose();
        out.fields.spinwave.row(static_cast<Eigen::Index>(n)) = s.transpose();
    };
    if (options.record_fields) {
        out.fields.signal.resize(nt, nz);
        out.fields.polarization.resize(nt, nz);
        out.fields.spinwave.resize(nt, nz);
    }

    detail::Rk4Stepper stepper(model);
    if (grid.size > 0) {
        const cplx e0 = boundary(grid.at(0));
        out.exit.samples[0] = detail::exit_field(model, state, e0);
        record(0, e0);
    }
    for (std::size_t n = 0; n + 1 < grid.size; ++n) {
        cplx e_out = 0.0;
        for (std::size_t k = 0; k < sub; ++k) {
            const double t0 = grid.at(n) + dt * static_cast<double>(k);
            const cplx e0[3] = {boundary(t0), boundary(t0 + 0.5 * dt), boundary(t0 + dt)};
            const cplx h[3] = {coupling(t0), coupling(t0 + 0.5 * dt), coupling(t0 + dt)};
            e_out = stepper.step(state, dt, e0, h);
        }
        if (!std::isfinite(e_out.real()) || !std::isfinite(e_out.imag()))
            throw NumericalError(std::string("non-finite signal field during ") + stage + " at t = " +
                                 std::to_string(grid.at(n + 1)) + " s");
        out.exit.samples[n + 1] = e_out;
        record(n + 1, boundary(grid.at(n + 1)));
    }
    detail::check_finite(state, stage);
    out.fields.final_state = std::move(state);
    return out;
}

std::vector<cplx> snapshot(const MediumState& state, const LambdaParams& params)
{
    const Eigen::VectorXcd s = state.collective_spinwave(params);
    return {s.data(), s.data() + s.size()};
}

void free_evolution(const detail::MediumModel& model, MediumState& state, double hold_time_s)
{
    if (hold_time_s < 0.0)
        throw ValidationError("hold time must be non-negative");
    if (hold_time_s == 0.0)
        return;
    for (std::size_t v = 0; v < state.polarization.size(); ++v) {
        state.polarization[v] *= std::exp(-model.decay[v] * hold_time_s);
        state.spinwave[v] *= std::exp(-model.spin_decay * hold_time_s);
    }
}

} // namespace

StorageRun simulate_storage(const LambdaParams& params, const PulseShape& signal_in, const PulseShape& control,
                            const SolverOptions& options)
{
    signal_in.validate();
    control.validate();
    if (!(signal_in.grid == control.grid))
        throw ValidationError("signal and control must share one time grid");
    const auto model = detail::make_model(params, options.z_points);

    auto prop = propagate(params, model, detail::zero_state(model), signal_in.grid, {&signal_in, &control}, options,
                          "storage");

    StorageRun run;
    auto& r = run.result;
    r.input_photons = signal_in.energy();
    const double stored = prop.fields.final_state.spinwave_excitation();
    r.eta_storage = r.input_photons > 0.0 ? stored / r.input_photons : 0.0;
    r.leaked_pulse = std::move(prop.exit);
    r.z = prop.fields.z;
    r.spinwave_snapshot = snapshot(prop.fields.final_state, params);

    run.fields = std::move(prop.fields);
    run.fields.input_photons = r.input_photons;
    run.fields.eta_storage = r.eta_storage;
    run.fields.stored_excitation = stored;
    return run;
}

MemoryResult simulate_retrieval(const FieldGrid& stored, const LambdaParams& params, const PulseShape& control,
                                double hold_time_s, const SolverOptions& options)
{
    control.validate();
    if (stored.final_state.spinwave.empty())
        throw ValidationError("retrieval needs a spin wave from a prior storage run");
    const auto model = detail::make_model(params, static_cast<std::size_t>(stored.final_state.spinwave.front().size()));
    if (model.decay.size() != stored.final_state.spinwave.size())
        throw ValidationError("velocity-class count differs from the storage run");

    MediumState state = stored.final_state;
    free_evolution(model, state, hold_time_s);
    if (params.retrieval == RetrievalDirection::backward) {
        for (auto& p : state.polarization)
            p.reverseInPlace();
        for (auto& s : state.spinwave)
            s.reverseInPlace();
    }
    const double available = state.spinwave_excitation();

    auto prop = propagate(params, model, std::move(state), control.grid, {nullptr, &control}, options, "retrieval");

    MemoryResult r;
    r.input_photons = stored.input_photons;
    r.eta_storage = stored.eta_storage;
    r.unintentional_readout_fraction = stored.unintentional_readout_fraction;
    r.decay_factor = stored.stored_excitation > 0.0 ? available / stored.stored_excitation : 0.0;
    const double emitted = prop.exit.energy();
    r.eta_retrieval = available > 0.0 ? emitted / available : 0.0;
    r.eta_internal_total = r.input_photons > 0.0 ? emitted / r.input_photons : 0.0;
    r.retrieved_pulse = std::move(prop.exit);
    r.z = prop.fields.z;
    r.spinwave_snapshot = snapshot(stored.final_state, params);
    return r;
}

HoldRun apply_control_leakage(const FieldGrid& stored, const LambdaParams& params, const PulseShape& leakage,
                              const SolverOptions& options)
{
    leakage.validate();
    if (stored.final_state.spinwave.empty())
        throw ValidationError("leakage run needs a spin wave from a prior storage run");
    const auto model = detail::make_model(params, static_cast<std::size_t>(stored.final_state.spinwave.front().size()));
    const double before = stored.final_state.spinwave_excitation();

    auto prop = propagate(params, model, stored.final_state, leakage.grid, {nullptr, &leakage}, options, "hold");

    HoldRun run;
    auto& r = run.result;
    r.input_photons = stored.input_photons;
    r.eta_storage = stored.eta_storage;
    const double emitted = prop.exit.energy();
    r.unintentional_readout_fraction = before > 0.0 ? emitted / before : 0.0;
    r.decay_factor = stored.stored_excitation > 0.0
                         ? prop.fields.final_state.spinwave_excitation() / stored.stored_excitation
                         : 0.0;
    r.unintentional_pulse = std::move(prop.exit);
    r.z = prop.fields.z;
    r.spinwave_snapshot = snapshot(prop.fields.final_state, params);

    run.fields = std::move(prop.fields);
    run.fields.input_photons = stored.input_photons;
    run.fields.eta_storage = stored.eta_storage;
    run.fields.stored_excitation = stored.stored_excitation;
    run.fields.unintentional_readout_fraction = r.unintentional_readout_fraction;
    return run;
}

double calibrate_leakage_scale(const FieldGrid& stored, const LambdaParams& params, const PulseShape& leakage,
                               double target_fraction, const SolverOptions& options)
{
    if (!(target_fraction > 0.0 && target_fraction < 1.0))
        throw ValidationError("target unintentional readout fraction must lie in (0, 1)");
    auto fraction = [&](double scale) {
        return apply_control_leakage(stored, params, leakage.scaled(scale), options)
            .result.unintentional_readout_fraction;
    };
    if (fraction(1.0) == 0.0 && leakage.peak() == 0.0)
        throw ValidationError("leakage template is identically zero");

    double lo = 1.0, hi = 1.0;
    double f_lo = fraction(lo);
    double f_hi = f_lo;
    for (int i = 0; i < 60 && f_lo > target_fraction; ++i) {
        hi = lo;
        f_hi = f_lo;
        lo *= 0.5;
        f_lo = fraction(lo);
    }
    for (int i = 0; i < 60 && f_hi < target_fraction; ++i) {
        lo = hi;
        f_lo = f_hi;
        hi *= 2.0;
        f_hi = fraction(hi);
    }
    if (!(f_lo <= target_fraction && f_hi >= target_fraction))
        throw NumericalError("could not bracket the leakage amplitude for the requested fraction");
    for (int i = 0; i < 60; ++i) {
        const double mid = std::sqrt(lo * hi);
        const double f = fraction(mid);
        if (std::abs(f - target_fraction) <= 1e-6 * target_fraction)
            return mid;
        (f < target_fraction ? lo : hi) = mid;
    }
    return std::sqrt(lo * hi);
}

Eigen::MatrixXcd complete_readout_kernel(const std::vector<double>& z, double optical_depth,
                                         RetrievalDirection direction)
{
    const auto n = static_cast<Eigen::Index>(z.size());
    const Eigen::VectorXd w = trapezoid_weights(z.size());
    const double dg = 0.5 * optical_depth;
    Eigen::MatrixXcd k(n, n);
    for (Eigen::Index a = 0; a < n; ++a) {
        const double xa = direction == RetrievalDirection::forward ? 1.0 - z[a] : z[a];
        for (Eigen::Index b = 0; b < n; ++b) {
            const double xb = direction == RetrievalDirection::forward ? 1.0 - z[b] : z[b];
            const double arg = dg * std::sqrt(xa * xb);
            const double val = 0.5 * dg * std::exp(-0.5 * dg * (xa + xb)) * boost::math::cyl_bessel_i(0, arg);
            k(a, b) = w(a) * val * w(b);
        }
    }
    return k;
}

double complete_readout_efficiency(const std::vector<double>& z, const Eigen::VectorXcd& spinwave,
                                   double optical_depth, RetrievalDirection direction)
{
    const Eigen::VectorXd w = trapezoid_weights(z.size());
    const double norm = w.dot(spinwave.cwiseAbs2());
    if (norm == 0.0)
        return 0.0;
    const Eigen::MatrixXcd k = complete_readout_kernel(z, optical_depth, direction);
    return (spinwave.adjoint() * k * spinwave)(0, 0).real() / norm;
}

} // namespace vqm
