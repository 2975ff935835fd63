#pragma once

#include "vaporqm/atom.hpp"
#include "vaporqm/transitions.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace vqm {

/// Uniform frequency grid (Hz) relative to the zero-field line center.
struct FrequencyGrid {
    double start_hz = -60e9;
    double step_hz = 10e6;
    std::size_t size = 12001;

    double at(std::size_t i) const { return start_hz + step_hz * static_cast<double>(i); }
    std::vector<double> values() const;
    static FrequencyGrid centered(double half_span_hz = 60e9, double step_hz = 10e6);
};

struct VaporConditions {
    double temperature_k = 363.15;
    double density_m3 = 0.0;           ///< per lower state
    double path_length_m = 2e-3;
    double buffer_broadening_hz = 0.0; ///< additional Lorentzian FWHM
};

struct AbsorptionSpectrum {
    std::vector<double> frequency_hz;
    std::vector<double> optical_depth;
    double temperature_k = 0.0;
    double density_m3 = 0.0;
    double buffer_broadening_hz = 0.0;

    double at(double frequency_hz) const; ///< linear interpolation
    double peak() const;
};

/// Doppler standard deviation (Hz) of the optical line at temperature T.
double doppler_sigma_hz(const AtomSpec& atom, double temperature_k);

/// Lorentzian FWHM (Hz): natural width plus buffer-gas broadening.
double lorentz_fwhm_hz(const AtomSpec& atom, double buffer_broadening_hz);

/// Resonant cross-section 3 lambda^2 / 2pi of the stretched line (m^2).
double resonant_cross_section(const AtomSpec& atom);

/// Intensity optical depth contribution of one line at one frequency.
double line_optical_depth(const AtomSpec& atom, const TransitionLine& line,
                          const VaporConditions& vapor, double frequency_hz);

/// Sum over lines of Voigt profiles; `frequency_shift_hz` offsets every line
/// (isotope shift when mixing species on one grid).
AbsorptionSpectrum voigt_absorption_spectrum(const AtomSpec& atom, std::span<const TransitionLine> lines,
                                             const VaporConditions& vapor, const FrequencyGrid& grid,
                                             double frequency_shift_hz = 0.0);

/// Pointwise sum of two spectra on the same grid.
AbsorptionSpectrum combine(const AbsorptionSpectrum& a, const AbsorptionSpectrum& b);

/// CSV with header `frequency_hz,optical_depth`.
void write_spectrum_csv(const AbsorptionSpectrum& spectrum, const std::filesystem::path& path);

} // namespace vqm
