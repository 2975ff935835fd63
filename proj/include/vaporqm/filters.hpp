#pragma once

#include <complex>
#include <filesystem>
#include <optional>
#include <vector>

namespace vqm {

/// Ideal Airy etalon. center_offset_hz is the detuning of the nearest
/// transmission peak from the signal frequency.
struct EtalonSpec {
    double free_spectral_range_hz = 71.1e9;
    double fwhm_hz = 1.19e9;
    double peak_transmission = 1.0;
    double center_offset_hz = 0.0;

    double finesse() const { return free_spectral_range_hz / fwhm_hz; }
    void validate() const;
};

/// T = T_peak / (1 + (2F/pi)^2 sin^2(pi (nu - center) / FSR)), nu relative to the signal.
double etalon_transmission(const EtalonSpec& spec, double detuning_hz);

/// Flat passband of width fwhm_hz around center_hz, floor_db below it elsewhere.
struct InterferenceFilter {
    double center_hz = 0.0;
    double fwhm_hz = 182e9;
    double passband_transmission = 1.0;
    double floor_db = 40.0;

    void validate() const;
    double transmission(double detuning_hz) const;
};

struct FilterChain {
    std::vector<EtalonSpec> etalons;
    std::optional<InterferenceFilter> broadband;
    double polarization_suppression_db = 80.0; ///< positive magnitude, applies to the control only

    void validate() const;
    /// Product of all spectral elements at a detuning from the signal.
    double spectral_transmission(double detuning_hz) const;
};

double to_db(double fraction);
double from_db(double db);

/// Complex field spectrum on a uniform, increasing frequency grid (Hz relative to the signal).
struct AmplitudeSpectrum {
    std::vector<double> frequency_hz;
    std::vector<std::complex<double>> amplitude;

    void validate() const;
    double power() const;
};

/// Power transmission sampled on a frequency grid.
struct TransmissionCurve {
    std::vector<double> frequency_hz;
    std::vector<double> transmission;
};

TransmissionCurve sample_chain(const FilterChain& chain, const std::vector<double>& frequency_hz);

struct ChainOutput {
    AmplitudeSpectrum transmitted;
    double power_transmission = 0.0; ///< energy out / energy in
};

/// Amplitudes are multiplied by sqrt(T); element phases are not modeled.
ChainOutput chain_transmission(const FilterChain& chain, const AmplitudeSpectrum& spectrum);
/// Same with a precomputed curve; throws ValidationError when grids differ.
ChainOutput chain_transmission(const TransmissionCurve& curve, const AmplitudeSpectrum& spectrum);

/// Chain transmission at the signal times the fiber/optics insertion budget.
double passive_transmission(const FilterChain& chain, double insertion_transmission);

struct SuppressionBudget {
    double control_photons = 0.0;
    double polarization_db = 0.0;
    double spectral_db = 0.0;
    double total_db = 0.0;
    double residual_photons = 0.0;
};

/// Residual control photons per pulse at the detector for a monochromatic
/// control `control_offset_hz` away from the signal.
SuppressionBudget control_suppression_budget(const FilterChain& chain, double control_photons,
                                             double control_offset_hz);

/// CSV `frequency_hz,re,im`.
AmplitudeSpectrum read_amplitude_csv(const std::filesystem::path& path);
void write_amplitude_csv(const AmplitudeSpectrum& spectrum, const std::filesystem::path& path);
/// CSV `frequency_hz,power`.
TransmissionCurve read_power_csv(const std::filesystem::path& path);
void write_power_csv(const std::vector<double>& frequency_hz, const std::vector<double>& power,
                     const std::filesystem::path& path);

} // namespace vqm
