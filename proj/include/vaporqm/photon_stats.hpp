#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace vqm {

struct TimeTag {
    std::uint64_t trigger_index = 0;
    std::uint16_t channel = 0;
    std::uint32_t timestamp_ps = 0; ///< since the trigger

    bool operator==(const TimeTag&) const = default;
};

struct TimeTagStream {
    std::vector<TimeTag> tags;
    std::uint64_t n_triggers = 0;
    double repetition_rate_hz = 300e3;
    double eta_det = 1.0;

    void validate() const;
    /// Order by (trigger, timestamp, channel).
    void sort();
};

/// CSV `trigger_index,channel,timestamp_ps`; metadata is not part of the file.
TimeTagStream read_timetags_csv(const std::filesystem::path& path, std::uint64_t n_triggers,
                                double repetition_rate_hz = 300e3, double eta_det = 1.0);
void write_timetags_csv(const TimeTagStream& stream, const std::filesystem::path& path);

/// Little-endian binary framing: a 16-byte header ("QMTT", u32 version = 1,
/// u64 n_triggers) followed by 16-byte records (u64 trigger_index,
/// u32 timestamp_ps, u16 channel, u16 reserved = 0).
TimeTagStream read_timetags_binary(const std::filesystem::path& path, double repetition_rate_hz = 300e3,
                                   double eta_det = 1.0);
void write_timetags_binary(const TimeTagStream& stream, const std::filesystem::path& path);

struct TimeWindow {
    double start_s = 0.0;
    double width_s = 0.0;
    double end_s() const { return start_s + width_s; }
};

struct Histogram {
    double start_s = 0.0;
    double bin_width_s = 0.0;
    std::vector<std::uint64_t> counts;

    std::vector<double> edges() const;
    std::uint64_t total() const;
    /// Bins whose centres fall inside the window.
    std::vector<std::size_t> bins_in(const TimeWindow& window) const;
    std::uint64_t counts_in(const TimeWindow& window) const;
};

/// Tags on the listed channels (all when empty) binned over [start, end).
/// The range must be a whole number of bins.
Histogram histogram(const TimeTagStream& stream, double bin_width_s, double start_s, double end_s,
                    const std::vector<std::uint16_t>& channels = {});

struct CountSummary {
    double n_ret = 0.0;
    double n_noise_raw = 0.0;
    double offset_per_bin = 0.0;
    double offset_sigma = 0.0;
    double roi_bins = 0.0;
    double n_noise = 0.0; ///< n_noise_raw + offset_per_bin * roi_bins
    TimeWindow roi{0.0, 6.48e-9};

    double spurious() const { return offset_per_bin * roi_bins; }
    double n_ret_sigma() const;
    double n_noise_sigma() const;
};

/// Offset from the quiet region; counts over the ROI.
CountSummary corrected_noise(const Histogram& signal, const Histogram& blocked, const TimeWindow& quiet_region,
                             const TimeWindow& roi);

/// Summary built from ROI totals (bin layout independent).
CountSummary count_summary(double n_ret, double n_noise_raw, double offset_per_bin, double roi_bins,
                           const TimeWindow& roi = {0.0, 6.48e-9});

struct Measured {
    double value = 0.0;
    double sigma = 0.0;
};

Measured snr(const CountSummary& summary);

/// 2 (1 - exp(-alpha_sq eta_det / 2)); meant for alpha_sq * eta_det <= 1.
double eta_det_hbt(double alpha_sq, double eta_det);
bool eta_det_hbt_out_of_domain(double alpha_sq, double eta_det);
/// Detector efficiency that yields `hbt` at `alpha_sq`.
double implied_eta_det(double alpha_sq, double hbt);

struct FomInputs {
    Measured alpha_sq{0.97, 0.06};
    Measured eta_det_hbt{0.70, 0.04};
    double n_triggers = 1.81e7;
};

struct FomReport {
    Measured snr;
    Measured mu1;
    bool mu1_defined = true;
    Measured eta_det_hbt;
    Measured eta_e2e;
    Measured alpha_sq;
    std::optional<Measured> eta_int_zero_time;
    std::vector<std::string> warnings;
};

FomReport figures_of_merit(const CountSummary& summary, const FomInputs& inputs);

/// eta_e2e / passive_transmission * exp(hold / tau).
double internal_efficiency(double eta_e2e, double passive_transmission, double hold_time_s, double tau_s);
Measured internal_efficiency(const Measured& eta_e2e, double passive_transmission, double hold_time_s,
                             double tau_s);

struct LifetimeSeries {
    std::vector<double> hold_time_s;
    std::vector<double> efficiency;  ///< as measured, before scaling
    std::vector<double> uncertainty; ///< one sigma; all zero means unweighted
    double scale_factor = 1.0;
    std::string scale_note;

    void validate() const;
    std::vector<double> scaled_efficiency() const;
    std::vector<double> scaled_uncertainty() const;
};

/// CSV `hold_time_s,efficiency,uncertainty`.
LifetimeSeries read_lifetime_csv(const std::filesystem::path& path, double scale_factor = 1.0,
                                 const std::string& scale_note = {});

enum class DecayModel { exponential, gaussian };
DecayModel parse_decay_model(std::string_view name);
std::string_view to_string(DecayModel model);

struct LifetimeFit {
    DecayModel model = DecayModel::exponential;
    double amplitude = 0.0;
    double amplitude_sigma = 0.0;
    double time_constant_s = 0.0; ///< tau, or sigma_t for the Gaussian model
    double time_constant_sigma_s = 0.0;
    double ci_low_s = 0.0; ///< 95 % interval of the time constant
    double ci_high_s = 0.0;
    double quantile = 1.96; ///< two-sided 95 % multiplier used for the interval and band
    double covariance = 0.0; ///< between amplitude and time constant
    double chi_squared = 0.0;
    std::size_t dof = 0;
    bool weighted = true;
    bool ok = false;
    std::string message;

    double evaluate(double t_s) const;
    /// 95 % band of the fitted curve by first-order propagation.
    std::pair<double, double> band(double t_s) const;
    double reduced_chi_squared() const { return dof ? chi_squared / static_cast<double>(dof) : 0.0; }
};

/// Damped least squares on the scaled series. Degenerate inputs return ok = false.
LifetimeFit fit_lifetime(const LifetimeSeries& series, DecayModel model);

/// Expected photons reaching the detectors per trigger in each time bin.
struct RateProfile {
    double start_s = 0.0;
    double bin_width_s = 162e-12;
    std::vector<double> photons_per_trigger;

    void validate() const;
};

/// Poisson arrivals summed over triggers per bin, thinned by eta_det and
/// split 50:50 onto channels 0 and 1. Arrival times are uniform in the bin
/// and trigger indices uniform over [0, n_triggers).
TimeTagStream generate_timetags(const RateProfile& signal, const RateProfile& noise, std::uint64_t n_triggers,
                                double eta_det, std::uint64_t seed);

} // namespace vqm
