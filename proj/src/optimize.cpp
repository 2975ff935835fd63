#include "vaporqm/optimize.hpp"

#include "lambda_medium.hpp"
#include "vaporqm/errors.hpp"

#include <ceres/ceres.h>

#include <algorithm>
#include <cmath>
#include <ostream>

namespace vqm {

using detail::cplx;

OptimizerMethod parse_optimizer_method(std::string_view name)
{
    if (name == "time_reversal")
        return OptimizerMethod::time_reversal;
    if (name == "gradient_ascent")
        return OptimizerMethod::gradient_ascent;
    throw ValidationError("unknown optimizer method '" + std::string(name) +
                          "' (expected time_reversal or gradient_ascent)");
}

std::string_view to_string(OptimizerMethod method)
{
    return method == OptimizerMethod::time_reversal ? "time_reversal" : "gradient_ascent";
}

namespace {

struct Window {
    double start = 0.0;
    double step = 0.0;
    std::size_t knots = 0;

    Window(const TimeGrid& grid, const ControlConstraints& c)
    {
        if (c.knots < 2)
            throw ValidationError("control needs at least two knots");
        if (!(c.peak_rabi_cap_rad_s > 0.0) || !std::isfinite(c.peak_rabi_cap_rad_s))
            throw ValidationError("peak Rabi cap must be positive and finite");
        double a = c.window_start_s, b = c.window_end_s;
        if (b <= a) {
            a = grid.start_s;
            b = grid.end_s();
        }
        if (b <= a)
            throw ValidationError("control window is empty");
        start = a;
        knots = c.knots;
        step = (b - a) / static_cast<double>(knots - 1);
    }

    /// Index of the left node and weight of the right node; k < 0 outside.
    std::pair<long, double> locate(double t) const
    {
        const double u = (t - start) / step;
        const double last = static_cast<double>(knots - 1);
        if (u < -1e-12 || u > last + 1e-12)
            return {-1, 0.0};
        const double uc = std::clamp(u, 0.0, last);
        const auto k = std::min<long>(static_cast<long>(uc), static_cast<long>(knots) - 2);
        return {k, uc - static_cast<double>(k)};
    }

    cplx value(double t, const std::vector<cplx>& c) const
    {
        const auto [k, w] = locate(t);
        if (k < 0)
            return 0.0;
        return (1.0 - w) * c[static_cast<std::size_t>(k)] + w * c[static_cast<std::size_t>(k) + 1];
    }
};

// Node values c = cap u / sqrt(1 + |u|^2) keep |c| below the cap without
// an explicit projection.
cplx squash(cplx u, double cap)
{
    return cap * u / std::sqrt(1.0 + std::norm(u));
}

cplx unsquash(cplx c, double cap)
{
    const double r = std::min(std::abs(c) / cap, 1.0 - 1e-9);
    return std::abs(c) == 0.0 ? cplx(0.0) : c / std::abs(c) * (r / std::sqrt(1.0 - r * r));
}

/// d/d(conj u) chain rule for the squashing map, given g = dJ/d(conj c).
cplx squash_gradient(cplx u, cplx g, double cap)
{
    const double f = 1.0 / std::sqrt(1.0 + std::norm(u));
    return cap * f * (g - f * f * u * (std::conj(u) * g).real());
}

class ControlProblem {
public:
    ControlProblem(const LambdaParams& params, const PulseShape& signal, const ControlConstraints& constraints,
                   const SolverOptions& options)
        : params_(params), signal_(signal), window_(signal.grid, constraints), cap_(constraints.peak_rabi_cap_rad_s),
          model_(detail::make_model(params, options.z_points))
    {
        if (params.velocity_classes > 1)
            throw ValidationError("control optimization supports a single velocity class only");
        signal.validate();
        sub_ = detail::substeps_for(model_, params, signal.grid.step_s, cap_, options);
        dt_ = signal.grid.step_s / static_cast<double>(sub_);
        std::vector<double> z(model_.nz);
        for (std::size_t j = 0; j < z.size(); ++j)
            z[j] = static_cast<double>(j) * model_.dz;
        kernel_ = complete_readout_kernel(z, params.optical_depth, params.retrieval);
        input_ = signal.energy();
        if (!(input_ > 0.0))
            throw ValidationError("signal pulse carries no photons");
    }

    const Window& window() const { return window_; }
    double cap() const { return cap_; }

    std::vector<cplx> nodes(const double* x) const
    {
        std::vector<cplx> c(window_.knots);
        for (std::size_t k = 0; k < c.size(); ++k)
            c[k] = squash({x[2 * k], x[2 * k + 1]}, cap_);
        return c;
    }

    struct Outcome {
        double efficiency = 0.0;
        double stored = 0.0;
    };

    Outcome evaluate(const std::vector<cplx>& c, std::vector<MediumState>* history = nullptr) const
    {
        const TimeGrid& g = signal_.grid;
        MediumState x = detail::zero_state(model_);
        detail::Rk4Stepper stepper(model_);
        if (history) {
            history->clear();
            history->reserve(g.size);
            history->push_back(x);
        }
        for (std::size_t n = 0; n + 1 < g.size; ++n) {
            for (std::size_t k = 0; k < sub_; ++k) {
                const double t0 = g.at(n) + dt_ * static_cast<double>(k);
                const cplx e0[3] = {signal_.at(t0), signal_.at(t0 + 0.5 * dt_), signal_.at(t0 + dt_)};
                const cplx h[3] = {0.5 * window_.value(t0, c), 0.5 * window_.value(t0 + 0.5 * dt_, c),
                                   0.5 * window_.value(t0 + dt_, c)};
                stepper.step(x, dt_, e0, h);
            }
            if (history)
                history->push_back(x);
        }
        detail::check_finite(x, "control optimization");
        const Eigen::VectorXcd& s = x.spinwave[0];
        Outcome out;
        out.efficiency = (s.adjoint() * kernel_ * s)(0, 0).real() / input_;
        out.stored = x.spinwave_excitation() / input_;
        return out;
    }

    /// Efficiency and dJ/d(conj c_k) from the adjoint system integrated
    /// backward from the final spin wave.
    double adjoint_gradient(const std::vector<cplx>& c, std::vector<cplx>& grad) const
    {
        std::vector<MediumState> history;
        const double eff = evaluate(c, &history).efficiency;
        const TimeGrid& g = signal_.grid;
        const auto nz = static_cast<Eigen::Index>(model_.nz);

        Eigen::VectorXcd lp = Eigen::VectorXcd::Zero(nz);
        Eigen::VectorXcd ls = 2.0 * (kernel_ * history.back().spinwave[0]);
        const cplx i(0.0, 1.0);
        const cplx gamma_c = std::conj(model_.decay[0]);
        const cplx spin_c = std::conj(model_.spin_decay);
        const double k2 = model_.kappa * model_.kappa;
        const double dz = model_.dz;

        // derivative with respect to reversed time
        auto rhs = [&](const Eigen::VectorXcd& p, const Eigen::VectorXcd& s, cplx h, Eigen::VectorXcd& dp,
                       Eigen::VectorXcd& ds) {
            dp.resize(nz);
            cplx tail = 0.0;
            for (Eigen::Index j = nz - 1; j >= 1; --j) {
                dp(j) = dz * (0.5 * p(j) + tail);
                tail += p(j);
            }
            dp(0) = 0.5 * dz * tail;
            dp = -(gamma_c * p + k2 * dp + i * h * s);
            ds = -(i * std::conj(h) * p + spin_c * s);
        };

        std::vector<cplx> gt(g.size);
        auto sample = [&](std::size_t n) {
            const Eigen::VectorXcd& p = history[n].polarization[0];
            const Eigen::VectorXcd& s = history[n].spinwave[0];
            gt[n] = -i * s.dot(lp) + i * ls.dot(p);
        };
        sample(g.size - 1);

        Eigen::VectorXcd k1p, k1s, k2p, k2s, k3p, k3s, k4p, k4s;
        for (std::size_t n = g.size - 1; n > 0; --n) {
            for (std::size_t k = 0; k < sub_; ++k) {
                const double t0 = g.at(n) - dt_ * static_cast<double>(k);
                const cplx h0 = 0.5 * window_.value(t0, c);
                const cplx hm = 0.5 * window_.value(t0 - 0.5 * dt_, c);
                const cplx h1 = 0.5 * window_.value(t0 - dt_, c);
                rhs(lp, ls, h0, k1p, k1s);
                rhs(lp + 0.5 * dt_ * k1p, ls + 0.5 * dt_ * k1s, hm, k2p, k2s);
                rhs(lp + 0.5 * dt_ * k2p, ls + 0.5 * dt_ * k2s, hm, k3p, k3s);
                rhs(lp + dt_ * k3p, ls + dt_ * k3s, h1, k4p, k4s);
                lp += dt_ / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
                ls += dt_ / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s);
            }
            sample(n - 1);
        }

        // dJ/d(conj c_k) = (1/2) integral of phi_k(t) G(t) dt, h = Omega/2
        grad.assign(window_.knots, 0.0);
        for (std::size_t n = 0; n < g.size; ++n) {
            const auto [k, w] = window_.locate(g.at(n));
            if (k < 0)
                continue;
            const double tw = (n == 0 || n + 1 == g.size) ? 0.5 : 1.0;
            const cplx v = 0.5 * tw * g.step_s * gt[n] / input_;
            grad[static_cast<std::size_t>(k)] += (1.0 - w) * v;
            grad[static_cast<std::size_t>(k) + 1] += w * v;
        }
        return eff;
    }

private:
    const LambdaParams& params_;
    const PulseShape& signal_;
    Window window_;
    double cap_;
    detail::MediumModel model_;
    std::size_t sub_ = 1;
    double dt_ = 0.0;
    Eigen::MatrixXcd kernel_;
    double input_ = 0.0;
};

class Objective final : public ceres::FirstOrderFunction {
public:
    Objective(const ControlProblem& problem, OptimizerMethod method, double fd_step)
        : problem_(problem), method_(method), fd_step_(fd_step)
    {
    }

    int NumParameters() const override { return static_cast<int>(2 * problem_.window().knots); }

    bool Evaluate(const double* x, double* cost, double* gradient) const override
    {
        try {
            const auto n = static_cast<std::size_t>(NumParameters());
            if (!gradient) {
                *cost = -problem_.evaluate(problem_.nodes(x)).efficiency;
                return true;
            }
            if (method_ == OptimizerMethod::time_reversal) {
                std::vector<cplx> g;
                *cost = -problem_.adjoint_gradient(problem_.nodes(x), g);
                for (std::size_t k = 0; k < g.size(); ++k) {
                    const cplx gu = squash_gradient({x[2 * k], x[2 * k + 1]}, g[k], problem_.cap());
                    gradient[2 * k] = -gu.real();
                    gradient[2 * k + 1] = -gu.imag();
                }
                return true;
            }
            *cost = -problem_.evaluate(problem_.nodes(x)).efficiency;
            std::vector<double> y(x, x + n);
            for (std::size_t j = 0; j < n; ++j) {
                const double h = fd_step_ * std::max(1.0, std::abs(x[j]));
                y[j] = x[j] + h;
                const double up = problem_.evaluate(problem_.nodes(y.data())).efficiency;
                y[j] = x[j] - h;
                const double down = problem_.evaluate(problem_.nodes(y.data())).efficiency;
                y[j] = x[j];
                gradient[j] = -(up - down) / (2.0 * h);
            }
            return true;
        } catch (const NumericalError&) {
            return false;
        }
    }

private:
    const ControlProblem& problem_;
    OptimizerMethod method_;
    double fd_step_;
};

class TraceCallback final : public ceres::IterationCallback {
public:
    TraceCallback(std::vector<double>& trace, double tolerance) : trace_(trace), tolerance_(tolerance) {}

    ceres::CallbackReturnType operator()(const ceres::IterationSummary& s) override
    {
        if (s.iteration > 0 && !s.step_is_successful)
            return ceres::SOLVER_CONTINUE;
        trace_.push_back(-s.cost);
        if (s.iteration == 0)
            return ceres::SOLVER_CONTINUE;
        small_ = s.cost_change < tolerance_ * std::max(std::abs(s.cost), 1e-12) ? small_ + 1 : 0;
        if (small_ >= 3) {
            converged = true;
            return ceres::SOLVER_TERMINATE_SUCCESSFULLY;
        }
        return ceres::SOLVER_CONTINUE;
    }

    bool converged = false;

private:
    std::vector<double>& trace_;
    double tolerance_;
    int small_ = 0;
};

} // namespace

PulseShape control_from_knots(const TimeGrid& grid, const ControlConstraints& constraints,
                              const std::vector<std::complex<double>>& knots)
{
    const Window w(grid, constraints);
    if (knots.size() != w.knots)
        throw ValidationError("knot count does not match the constraints");
    PulseShape p;
    p.grid = grid;
    p.samples.resize(grid.size);
    for (std::size_t n = 0; n < grid.size; ++n)
        p.samples[n] = w.value(grid.at(n), knots);
    return p;
}

double readout_bound_efficiency(const LambdaParams& params, const PulseShape& signal_in, const PulseShape& control,
                                const SolverOptions& options)
{
    if (params.velocity_classes > 1)
        throw ValidationError("complete-readout efficiency needs a single velocity class");
    const auto run = simulate_storage(params, signal_in, control, options);
    return run.result.eta_storage * complete_readout_efficiency(run.fields.z, run.fields.final_state.spinwave[0],
                                                                params.optical_depth, params.retrieval);
}

OptimizationResult optimize_control(const LambdaParams& params, const PulseShape& signal_in,
                                    const ControlConstraints& constraints, const OptimizerOptions& options)
{
    if (!(options.tolerance > 0.0))
        throw ValidationError("optimizer tolerance must be positive");
    if (options.max_iterations == 0)
        throw ValidationError("optimizer needs at least one iteration");
    if (!(options.initial_fraction > 0.0 && options.initial_fraction < 1.0))
        throw ValidationError("initial control fraction must lie in (0, 1)");

    const ControlProblem problem(params, signal_in, constraints, options.solver);
    const std::size_t k = problem.window().knots;
    std::vector<double> x(2 * k);
    if (!options.initial_knots.empty()) {
        if (options.initial_knots.size() != k)
            throw ValidationError("initial knot count does not match the constraints");
        for (std::size_t j = 0; j < k; ++j) {
            const double m = std::abs(options.initial_knots[j]);
            const cplx c = m < 1e-3 * problem.cap() ? cplx(1e-3 * problem.cap()) : options.initial_knots[j];
            const cplx u = unsquash(c, problem.cap());
            x[2 * j] = u.real();
            x[2 * j + 1] = u.imag();
        }
    } else {
        // Gaussian start on the signal centroid, one third of the window wide
        const Window& w = problem.window();
        const double span = w.step * static_cast<double>(k - 1);
        double num = 0.0, den = 0.0;
        for (std::size_t n = 0; n < signal_in.samples.size(); ++n) {
            num += std::norm(signal_in.samples[n]) * signal_in.grid.at(n);
            den += std::norm(signal_in.samples[n]);
        }
        const double centre = std::clamp(den > 0.0 ? num / den : w.start + 0.5 * span, w.start, w.start + span);
        for (std::size_t j = 0; j < k; ++j) {
            const double s = (w.start + w.step * static_cast<double>(j) - centre) / (span / 3.0);
            const double a = options.initial_fraction * std::exp(-4.0 * std::log(2.0) * s * s);
            const cplx u = unsquash(std::max(a, 1e-3) * problem.cap(), problem.cap());
            x[2 * j] = u.real();
            x[2 * j + 1] = u.imag();
        }
    }

    OptimizationResult result;
    ceres::GradientProblem gp(new Objective(problem, options.method, options.fd_step));
    ceres::GradientProblemSolver::Options so;
    so.line_search_direction_type = ceres::LBFGS;
    so.line_search_type = ceres::WOLFE;
    so.max_num_iterations = static_cast<int>(options.max_iterations);
    so.function_tolerance = 1e-14;
    so.gradient_tolerance = 1e-14;
    so.parameter_tolerance = 1e-14;
    so.logging_type = ceres::SILENT;
    so.minimizer_progress_to_stdout = false;
    TraceCallback callback(result.trace, options.tolerance);
    so.callbacks.push_back(&callback);

    ceres::GradientProblemSolver::Summary summary;
    ceres::Solve(so, gp, x.data(), &summary);

    const auto nodes = problem.nodes(x.data());
    const auto final = problem.evaluate(nodes);
    result.control = control_from_knots(signal_in.grid, constraints, nodes);
    result.knots = nodes;
    result.efficiency = final.efficiency;
    result.eta_storage = final.stored;
    result.iterations = summary.iterations.empty() ? 0 : summary.iterations.size() - 1;
    if (result.trace.empty())
        result.trace.push_back(final.efficiency);
    result.converged = callback.converged || summary.termination_type == ceres::CONVERGENCE;
    if (!result.converged)
        result.warning = "optimizer stopped before convergence: " + summary.message;
    return result;
}

std::vector<OdCurvePoint> efficiency_vs_od_curve(const std::vector<double>& optical_depths, const LambdaParams& params,
                                                 const PulseShape& signal_in, const ControlConstraints& constraints,
                                                 const OptimizerOptions& options)
{
    std::vector<OdCurvePoint> curve;
    curve.reserve(optical_depths.size());
    std::vector<std::complex<double>> previous;
    for (double d : optical_depths) {
        LambdaParams p = params;
        p.optical_depth = d;
        OptimizerOptions cold = options;
        cold.initial_knots.clear();
        auto r = optimize_control(p, signal_in, constraints, cold);
        if (!previous.empty()) {
            OptimizerOptions warm = options;
            warm.initial_knots = previous;
            auto rw = optimize_control(p, signal_in, constraints, warm);
            if (rw.efficiency > r.efficiency)
                r = std::move(rw);
        }
        previous = r.knots;
        curve.push_back({d, r.efficiency, r.eta_storage, r.iterations, r.converged});
    }
    return curve;
}

void write_od_curve_csv(std::ostream& out, const std::vector<OdCurvePoint>& curve)
{
    out << "optical_depth,efficiency,eta_storage,iterations,converged\n";
    out.precision(10);
    for (const auto& p : curve)
        out << p.optical_depth << ',' << p.efficiency << ',' << p.eta_storage << ',' << p.iterations << ','
            << (p.converged ? 1 : 0) << '\n';
}

} // namespace vqm
