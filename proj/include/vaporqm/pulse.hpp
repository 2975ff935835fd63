#pragma once

#include <complex>
#include <filesystem>
#include <vector>

namespace vqm {

/// Uniform time grid in seconds.
struct TimeGrid {
    double start_s = 0.0;
    double step_s = 1e-11;
    std::size_t size = 0;

    double at(std::size_t i) const { return start_s + step_s * static_cast<double>(i); }
    double end_s() const { return size == 0 ? start_s : at(size - 1); }
    bool operator==(const TimeGrid&) const = default;

    /// Grid covering [start, end] with at most `max_step` spacing.
    static TimeGrid spanning(double start_s, double end_s, double max_step_s);
};

/// Sampled complex envelope. For a signal, |E|^2 is a photon flux (1/s) so the
/// integral of |E|^2 dt is the mean photon number. For a control, the samples
/// are the Rabi frequency Omega(t) in rad/s.
struct PulseShape {
    TimeGrid grid;
    std::vector<std::complex<double>> samples;

    /// Trapezoid integral of |samples|^2 over the grid.
    double energy() const;
    double peak() const;
    /// Linear interpolation, zero outside the grid.
    std::complex<double> at(double t_s) const;
    PulseShape scaled(std::complex<double> factor) const;

    /// Throws ValidationError on a non-uniform grid or non-finite samples.
    void validate() const;
};

/// Rescale so that energy() equals `photons`.
PulseShape normalized(const PulseShape& pulse, double photons);

/// Gaussian Rabi-frequency envelope with the given intensity FWHM and peak.
PulseShape gaussian_control(const TimeGrid& grid, double center_s, double fwhm_s, double peak_rabi_rad_s);

/// Built-in signal template: intensity (1 - exp(-s/rise)) exp(-s/decay) for
/// s = t - start in [0, window], normalized to `photons`.
PulseShape signal_template(const TimeGrid& grid, double start_s, double photons,
                           double rise_s = 0.5e-9, double decay_s = 1.5e-9, double window_s = 6.48e-9);

/// Control leakage during the hold: A exp(-s/decay) sin(2 pi f s) for s >= 0.
PulseShape decaying_sinusoid(const TimeGrid& grid, double start_s, double amplitude_rad_s,
                             double ring_frequency_hz, double decay_s);

/// CSV `time_s,re,im`.
PulseShape read_pulse_csv(const std::filesystem::path& path);
void write_pulse_csv(const PulseShape& pulse, const std::filesystem::path& path);

} // namespace vqm
