#include "vaporqm/photon_stats.hpp"

#include "csv.hpp"
#include "vaporqm/errors.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <ceres/ceres.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

namespace vqm {

static_assert(std::endian::native == std::endian::little, "binary time-tag I/O assumes a little-endian host");

void TimeTagStream::validate() const
{
    for (const auto& t : tags)
        if (t.trigger_index >= n_triggers)
            throw ValidationError("time tag trigger index " + std::to_string(t.trigger_index) +
                                  " is not below n_triggers = " + std::to_string(n_triggers));
    if (!(repetition_rate_hz > 0.0))
        throw ValidationError("repetition rate must be positive");
    if (!(eta_det >= 0.0 && eta_det <= 1.0))
        throw ValidationError("detector efficiency must lie in [0, 1]");
}

void TimeTagStream::sort()
{
    std::sort(tags.begin(), tags.end(), [](const TimeTag& a, const TimeTag& b) {
        return std::tie(a.trigger_index, a.timestamp_ps, a.channel) <
               std::tie(b.trigger_index, b.timestamp_ps, b.channel);
    });
}

TimeTagStream read_timetags_csv(const std::filesystem::path& path, std::uint64_t n_triggers,
                                double repetition_rate_hz, double eta_det)
{
    TimeTagStream s;
    s.n_triggers = n_triggers;
    s.repetition_rate_hz = repetition_rate_hz;
    s.eta_det = eta_det;
    for (const auto& row : detail::read_numeric_csv(path, "trigger_index,channel,timestamp_ps")) {
        if (row[0] < 0.0 || row[1] < 0.0 || row[2] < 0.0 || row[1] > 65535.0 || row[2] > 4294967295.0)
            throw ValidationError(path.string() + ": time tag field out of range");
        s.tags.push_back({static_cast<std::uint64_t>(row[0]), static_cast<std::uint16_t>(row[1]),
                          static_cast<std::uint32_t>(row[2])});
    }
    s.validate();
    return s;
}

void write_timetags_csv(const TimeTagStream& stream, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw ValidationError("cannot write " + path.string());
    out << "trigger_index,channel,timestamp_ps\n";
    for (const auto& t : stream.tags)
        out << t.trigger_index << ',' << t.channel << ',' << t.timestamp_ps << '\n';
}

namespace {

constexpr std::array<char, 4> tag_magic{'Q', 'M', 'T', 'T'};
constexpr std::uint32_t tag_version = 1;

template <class T>
void put(std::ostream& out, T v)
{
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(const char* p)
{
    T v;
    std::memcpy(&v, p, sizeof v);
    return v;
}

} // namespace

void write_timetags_binary(const TimeTagStream& stream, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ValidationError("cannot write " + path.string());
    out.write(tag_magic.data(), 4);
    put(out, tag_version);
    put(out, stream.n_triggers);
    for (const auto& t : stream.tags) {
        put(out, t.trigger_index);
        put(out, t.timestamp_ps);
        put(out, t.channel);
        put(out, std::uint16_t{0});
    }
}

TimeTagStream read_timetags_binary(const std::filesystem::path& path, double repetition_rate_hz, double eta_det)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ValidationError("cannot open " + path.string());
    std::array<char, 16> rec{};
    if (!in.read(rec.data(), 16) || std::memcmp(rec.data(), tag_magic.data(), 4) != 0)
        throw ValidationError(path.string() + ": not a time-tag file");
    if (get<std::uint32_t>(rec.data() + 4) != tag_version)
        throw ValidationError(path.string() + ": unsupported time-tag format version");
    TimeTagStream s;
    s.n_triggers = get<std::uint64_t>(rec.data() + 8);
    s.repetition_rate_hz = repetition_rate_hz;
    s.eta_det = eta_det;
    while (in.read(rec.data(), 16))
        s.tags.push_back({get<std::uint64_t>(rec.data()), get<std::uint16_t>(rec.data() + 12),
                          get<std::uint32_t>(rec.data() + 8)});
    if (in.gcount() != 0)
        throw ValidationError(path.string() + ": truncated record at end of file");
    s.validate();
    return s;
}

std::vector<double> Histogram::edges() const
{
    std::vector<double> e(counts.size() + 1);
    for (std::size_t i = 0; i < e.size(); ++i)
        e[i] = start_s + bin_width_s * static_cast<double>(i);
    return e;
}

std::uint64_t Histogram::total() const
{
    return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

std::vector<std::size_t> Histogram::bins_in(const TimeWindow& window) const
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const double c = start_s + bin_width_s * (static_cast<double>(i) + 0.5);
        if (c > window.start_s && c < window.end_s())
            out.push_back(i);
    }
    return out;
}

std::uint64_t Histogram::counts_in(const TimeWindow& window) const
{
    std::uint64_t sum = 0;
    for (auto i : bins_in(window))
        sum += counts[i];
    return sum;
}

Histogram histogram(const TimeTagStream& stream, double bin_width_s, double start_s, double end_s,
                    const std::vector<std::uint16_t>& channels)
{
    if (!(bin_width_s > 0.0) || !std::isfinite(bin_width_s))
        throw ValidationError("histogram bin width must be positive");
    if (!(end_s > start_s))
        throw ValidationError("histogram range is empty");
    const double n = (end_s - start_s) / bin_width_s;
    const double nr = std::round(n);
    if (std::abs(n - nr) > 1e-6 * std::max(1.0, n))
        throw ValidationError("histogram range is not a whole number of bins (non-uniform last bin)");

    Histogram h;
    h.start_s = start_s;
    h.bin_width_s = bin_width_s;
    h.counts.assign(static_cast<std::size_t>(nr), 0);
    for (const auto& t : stream.tags) {
        if (!channels.empty() && std::find(channels.begin(), channels.end(), t.channel) == channels.end())
            continue;
        const double x = (static_cast<double>(t.timestamp_ps) * 1e-12 - start_s) / bin_width_s;
        if (x < 0.0)
            continue;
        const auto i = static_cast<std::size_t>(x);
        if (i < h.counts.size())
            ++h.counts[i];
    }
    return h;
}

double CountSummary::n_ret_sigma() const
{
    return std::sqrt(std::max(n_ret, 0.0));
}

double CountSummary::n_noise_sigma() const
{
    const double s = roi_bins * offset_sigma;
    return std::sqrt(std::max(n_noise_raw, 0.0) + s * s);
}

CountSummary corrected_noise(const Histogram& signal, const Histogram& blocked, const TimeWindow& quiet_region,
                             const TimeWindow& roi)
{
    if (signal.counts.size() != blocked.counts.size() || signal.start_s != blocked.start_s ||
        signal.bin_width_s != blocked.bin_width_s)
        throw ValidationError("signal and blocked histograms must share identical bins");
    if (!(roi.width_s > 0.0))
        throw ValidationError("ROI width must be positive");
    if (quiet_region.start_s < roi.end_s() && roi.start_s < quiet_region.end_s())
        throw ValidationError("quiet region overlaps the ROI");
    const auto quiet = signal.bins_in(quiet_region);
    if (quiet.empty())
        throw ValidationError("quiet region contains no histogram bins");
    const auto roi_bins = signal.bins_in(roi);
    if (roi_bins.empty())
        throw ValidationError("ROI contains no histogram bins");

    double diff = 0.0, var = 0.0;
    for (auto i : quiet) {
        diff += static_cast<double>(signal.counts[i]) - static_cast<double>(blocked.counts[i]);
        var += static_cast<double>(signal.counts[i]) + static_cast<double>(blocked.counts[i]);
    }
    const double q = static_cast<double>(quiet.size());

    CountSummary s;
    s.roi = roi;
    s.roi_bins = static_cast<double>(roi_bins.size());
    s.offset_per_bin = diff / q;
    s.offset_sigma = std::sqrt(var) / q;
    s.n_ret = static_cast<double>(signal.counts_in(roi));
    s.n_noise_raw = static_cast<double>(blocked.counts_in(roi));
    s.n_noise = s.n_noise_raw + s.offset_per_bin * s.roi_bins;
    return s;
}

CountSummary count_summary(double n_ret, double n_noise_raw, double offset_per_bin, double roi_bins,
                           const TimeWindow& roi)
{
    if (!(n_ret >= 0.0) || !(n_noise_raw >= 0.0) || !(roi_bins > 0.0) || !std::isfinite(offset_per_bin))
        throw ValidationError("count totals must be non-negative and the ROI non-empty");
    CountSummary s;
    s.roi = roi;
    s.n_ret = n_ret;
    s.n_noise_raw = n_noise_raw;
    s.offset_per_bin = offset_per_bin;
    s.roi_bins = roi_bins;
    // Poisson error of the added total when the per-bin spread is unknown
    s.offset_sigma = std::sqrt(std::abs(offset_per_bin * roi_bins)) / roi_bins;
    s.n_noise = n_noise_raw + offset_per_bin * roi_bins;
    return s;
}

Measured snr(const CountSummary& s)
{
    if (!(s.n_noise > 0.0))
        throw ValidationError("SNR undefined: no noise counts in the ROI");
    const double v = (s.n_ret - s.n_noise) / s.n_noise;
    const double d_ret = 1.0 / s.n_noise;
    const double d_noise = -s.n_ret / (s.n_noise * s.n_noise);
    return {v, std::hypot(d_ret * s.n_ret_sigma(), d_noise * s.n_noise_sigma())};
}

double eta_det_hbt(double alpha_sq, double eta_det)
{
    if (!(alpha_sq >= 0.0) || !std::isfinite(alpha_sq))
        throw ValidationError("mean photon number must be non-negative");
    if (!(eta_det >= 0.0 && eta_det <= 1.0))
        throw ValidationError("detector efficiency must lie in [0, 1]");
    return 2.0 * (1.0 - std::exp(-0.5 * alpha_sq * eta_det));
}

bool eta_det_hbt_out_of_domain(double alpha_sq, double eta_det)
{
    return alpha_sq * eta_det > 1.0;
}

double implied_eta_det(double alpha_sq, double hbt)
{
    if (!(alpha_sq > 0.0))
        throw ValidationError("mean photon number must be positive to invert the click probability");
    if (!(hbt >= 0.0 && hbt < 2.0))
        throw ValidationError("click probability must lie in [0, 2)");
    const double eta = -2.0 * std::log1p(-0.5 * hbt) / alpha_sq;
    if (eta > 1.0)
        throw ValidationError("no detector efficiency in [0, 1] yields this click probability");
    return eta;
}

FomReport figures_of_merit(const CountSummary& summary, const FomInputs& in)
{
    if (!(in.n_triggers > 0.0))
        throw ValidationError("number of triggers must be positive");
    if (!(in.eta_det_hbt.value > 0.0))
        throw ValidationError("click probability must be positive");
    if (in.alpha_sq.value < 0.0 || in.alpha_sq.sigma < 0.0 || in.eta_det_hbt.sigma < 0.0)
        throw ValidationError("mean photon number and uncertainties must be non-negative");

    FomReport r;
    r.alpha_sq = in.alpha_sq;
    r.eta_det_hbt = in.eta_det_hbt;
    r.snr = snr(summary);

    const double h = in.eta_det_hbt.value;
    const double net = summary.n_ret - summary.n_noise;
    const double e2e = net / (h * in.n_triggers);
    const double net_sigma = std::hypot(summary.n_ret_sigma(), summary.n_noise_sigma());
    r.eta_e2e = {e2e, std::hypot(net_sigma / (h * in.n_triggers), e2e * in.eta_det_hbt.sigma / h)};

    if (r.snr.value > 0.0) {
        const double snr_v = r.snr.value;
        r.mu1 = {h / snr_v, std::hypot(in.eta_det_hbt.sigma / snr_v, h * r.snr.sigma / (snr_v * snr_v))};
    } else {
        r.mu1_defined = false;
        r.warnings.emplace_back("mu1 undefined: SNR is not positive");
    }
    if (net < 0.0)
        r.warnings.emplace_back("retrieval counts below the corrected noise level");
    return r;
}

double internal_efficiency(double eta_e2e, double passive_transmission, double hold_time_s, double tau_s)
{
    if (!(passive_transmission > 0.0 && passive_transmission <= 1.0))
        throw ValidationError("passive transmission must lie in (0, 1]");
    if (!(tau_s > 0.0))
        throw ValidationError("lifetime must be positive");
    if (hold_time_s < 0.0)
        throw ValidationError("hold time must be non-negative");
    return eta_e2e / passive_transmission * std::exp(hold_time_s / tau_s);
}

Measured internal_efficiency(const Measured& eta_e2e, double passive_transmission, double hold_time_s,
                             double tau_s)
{
    const double f = internal_efficiency(1.0, passive_transmission, hold_time_s, tau_s);
    return {eta_e2e.value * f, eta_e2e.sigma * f};
}

void LifetimeSeries::validate() const
{
    const std::size_t n = hold_time_s.size();
    if (efficiency.size() != n || (!uncertainty.empty() && uncertainty.size() != n))
        throw ValidationError("lifetime series columns differ in length");
    for (std::size_t i = 1; i < n; ++i)
        if (!(hold_time_s[i] > hold_time_s[i - 1]))
            throw ValidationError("hold times must be strictly increasing");
    if (!(scale_factor > 0.0) || !std::isfinite(scale_factor))
        throw ValidationError("lifetime scale factor must be positive");
    const bool any = std::any_of(uncertainty.begin(), uncertainty.end(), [](double u) { return u != 0.0; });
    for (double u : uncertainty)
        if (u < 0.0 || (any && u == 0.0) || !std::isfinite(u))
            throw ValidationError("uncertainties must be all positive or all zero");
}

std::vector<double> LifetimeSeries::scaled_efficiency() const
{
    std::vector<double> out(efficiency);
    for (double& v : out)
        v *= scale_factor;
    return out;
}

std::vector<double> LifetimeSeries::scaled_uncertainty() const
{
    std::vector<double> out(uncertainty.empty() ? std::vector<double>(efficiency.size(), 0.0) : uncertainty);
    for (double& v : out)
        v *= scale_factor;
    return out;
}

LifetimeSeries read_lifetime_csv(const std::filesystem::path& path, double scale_factor,
                                 const std::string& scale_note)
{
    LifetimeSeries s;
    for (const auto& row : detail::read_numeric_csv(path, "hold_time_s,efficiency,uncertainty")) {
        s.hold_time_s.push_back(row[0]);
        s.efficiency.push_back(row[1]);
        s.uncertainty.push_back(row[2]);
    }
    s.scale_factor = scale_factor;
    s.scale_note = scale_note;
    s.validate();
    return s;
}

DecayModel parse_decay_model(std::string_view name)
{
    if (name == "exponential")
        return DecayModel::exponential;
    if (name == "gaussian")
        return DecayModel::gaussian;
    throw ValidationError("unknown decay model '" + std::string(name) + "' (expected exponential or gaussian)");
}

std::string_view to_string(DecayModel model)
{
    return model == DecayModel::exponential ? "exponential" : "gaussian";
}

namespace {

// shape and its derivative with respect to the time constant, per unit amplitude
std::pair<double, double> decay_shape(DecayModel m, double t, double tc)
{
    if (m == DecayModel::exponential) {
        const double e = std::exp(-t / tc);
        return {e, e * t / (tc * tc)};
    }
    const double e = std::exp(-t * t / (2.0 * tc * tc));
    return {e, e * t * t / (tc * tc * tc)};
}

class DecayResidual final : public ceres::SizedCostFunction<1, 2> {
public:
    DecayResidual(DecayModel m, double t, double y, double sigma) : m_(m), t_(t), y_(y), sigma_(sigma) {}

    bool Evaluate(double const* const* p, double* residual, double** jac) const override
    {
        const double a = p[0][0], tc = p[0][1];
        if (!(tc > 0.0))
            return false;
        const auto [f, df] = decay_shape(m_, t_, tc);
        residual[0] = (y_ - a * f) / sigma_;
        if (jac && jac[0]) {
            jac[0][0] = -f / sigma_;
            jac[0][1] = -a * df / sigma_;
        }
        return true;
    }

private:
    DecayModel m_;
    double t_, y_, sigma_;
};

} // namespace

double LifetimeFit::evaluate(double t_s) const
{
    return amplitude * decay_shape(model, t_s, time_constant_s).first;
}

std::pair<double, double> LifetimeFit::band(double t_s) const
{
    const auto [f, df] = decay_shape(model, t_s, time_constant_s);
    const double ga = f, gt = amplitude * df;
    const double var = ga * ga * amplitude_sigma * amplitude_sigma + gt * gt * time_constant_sigma_s *
                       time_constant_sigma_s + 2.0 * ga * gt * covariance;
    const double half = quantile * std::sqrt(std::max(var, 0.0));
    const double y = amplitude * f;
    return {y - half, y + half};
}

LifetimeFit fit_lifetime(const LifetimeSeries& series, DecayModel model)
{
    series.validate();
    const std::size_t n = series.hold_time_s.size();
    if (n < 4)
        throw ValidationError("lifetime fit needs at least 4 points");
    const auto y = series.scaled_efficiency();
    const auto u = series.scaled_uncertainty();
    const auto& t = series.hold_time_s;

    LifetimeFit fit;
    fit.model = model;
    fit.dof = n - 2;
    fit.weighted = u.front() > 0.0;

    const auto [ymin, ymax] = std::minmax_element(y.begin(), y.end());
    if (*ymax - *ymin <= 1e-12 * std::max(std::abs(*ymax), 1e-300)) {
        fit.message = "degenerate series: all efficiencies equal";
        return fit;
    }

    // starting point from a straight-line fit of log(y) against t or t^2
    double sx = 0, sy = 0, sxx = 0, sxy = 0, m = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(y[i] > 0.0))
            continue;
        const double x = model == DecayModel::exponential ? t[i] : t[i] * t[i];
        const double ly = std::log(y[i]);
        sx += x;
        sy += ly;
        sxx += x * x;
        sxy += x * ly;
        m += 1.0;
    }
    const double span = t.back() - t.front();
    double slope = m >= 2.0 ? (m * sxy - sx * sy) / (m * sxx - sx * sx) : 0.0;
    double p[2];
    if (!(slope < 0.0) || !std::isfinite(slope)) {
        p[1] = std::max(span, 1e-12);
        p[0] = *ymax;
    } else {
        p[1] = model == DecayModel::exponential ? -1.0 / slope : std::sqrt(-0.5 / slope);
        p[0] = std::exp((sy - slope * sx) / m);
    }

    ceres::Problem problem;
    for (std::size_t i = 0; i < n; ++i)
        problem.AddResidualBlock(new DecayResidual(model, t[i], y[i], fit.weighted ? u[i] : 1.0), nullptr, p);
    problem.SetParameterLowerBound(p, 1, 1e-6 * std::max(span, 1e-12));

    ceres::Solver::Options opts;
    opts.linear_solver_type = ceres::DENSE_QR;
    opts.max_num_iterations = 500;
    opts.function_tolerance = 1e-16;
    opts.gradient_tolerance = 1e-16;
    opts.parameter_tolerance = 1e-16;
    opts.logging_type = ceres::SILENT;
    ceres::Solver::Summary summary;
    ceres::Solve(opts, &problem, &summary);
    if (!summary.IsSolutionUsable()) {
        fit.message = "fit failed: " + summary.message;
        return fit;
    }

    fit.amplitude = p[0];
    fit.time_constant_s = p[1];
    fit.chi_squared = 2.0 * summary.final_cost;

    ceres::Covariance::Options copts;
    ceres::Covariance cov(copts);
    std::vector<std::pair<const double*, const double*>> blocks{{p, p}};
    double c[4];
    if (!cov.Compute(blocks, &problem) || !cov.GetCovarianceBlock(p, p, c)) {
        fit.message = "degenerate series: covariance is singular";
        return fit;
    }
    double scale = 1.0;
    if (!fit.weighted) {
        scale = fit.dof ? fit.chi_squared / static_cast<double>(fit.dof) : 0.0;
        fit.quantile = boost::math::quantile(boost::math::complement(boost::math::students_t(fit.dof), 0.025));
    }
    fit.amplitude_sigma = std::sqrt(c[0] * scale);
    fit.time_constant_sigma_s = std::sqrt(c[3] * scale);
    fit.covariance = c[1] * scale;
    fit.ci_low_s = fit.time_constant_s - fit.quantile * fit.time_constant_sigma_s;
    fit.ci_high_s = fit.time_constant_s + fit.quantile * fit.time_constant_sigma_s;
    if (fit.time_constant_s > 1e3 * std::max(span, 1e-12)) {
        fit.message = "degenerate series: no measurable decay over the hold range";
        return fit;
    }
    fit.ok = true;
    fit.message = "converged";
    return fit;
}

void RateProfile::validate() const
{
    if (!(bin_width_s > 0.0))
        throw ValidationError("rate profile bin width must be positive");
    if (start_s < 0.0)
        throw ValidationError("rate profile must start at or after the trigger");
    for (double r : photons_per_trigger)
        if (!(r >= 0.0) || !std::isfinite(r))
            throw ValidationError("rate profile values must be finite and non-negative");
    const double end_ps = (start_s + bin_width_s * static_cast<double>(photons_per_trigger.size())) * 1e12;
    if (end_ps >= 4294967295.0)
        throw ValidationError("rate profile extends beyond the 32-bit picosecond timestamp range");
}

TimeTagStream generate_timetags(const RateProfile& signal, const RateProfile& noise, std::uint64_t n_triggers,
                                double eta_det, std::uint64_t seed)
{
    signal.validate();
    noise.validate();
    if (!(eta_det >= 0.0 && eta_det <= 1.0))
        throw ValidationError("detector efficiency must lie in [0, 1]");

    TimeTagStream out;
    out.n_triggers = n_triggers;
    out.eta_det = eta_det;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::uint64_t> trigger(0, n_triggers ? n_triggers - 1 : 0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::bernoulli_distribution channel(0.5);

    for (const RateProfile* profile : {&signal, &noise}) {
        for (std::size_t b = 0; b < profile->photons_per_trigger.size(); ++b) {
            const double mean = profile->photons_per_trigger[b] * static_cast<double>(n_triggers);
            if (mean <= 0.0)
                continue;
            const auto arrived = std::poisson_distribution<std::uint64_t>(mean)(rng);
            const auto detected =
                eta_det >= 1.0 ? arrived : std::binomial_distribution<std::uint64_t>(arrived, eta_det)(rng);
            const double t0 = profile->start_s + profile->bin_width_s * static_cast<double>(b);
            for (std::uint64_t k = 0; k < detected; ++k) {
                const double ts = (t0 + profile->bin_width_s * unit(rng)) * 1e12;
                out.tags.push_back({trigger(rng), static_cast<std::uint16_t>(channel(rng) ? 1 : 0),
                                    static_cast<std::uint32_t>(ts)});
            }
        }
    }
    out.sort();
    return out;
}

} // namespace vqm
