#include "vaporqm/spectrum.hpp"

#include "vaporqm/errors.hpp"
#include "vaporqm/faddeeva.hpp"
#include "vaporqm/physical_constants.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

namespace vqm {

std::vector<double> FrequencyGrid::values() const
{
    std::vector<double> v(size);
    for (std::size_t i = 0; i < size; ++i)
        v[i] = at(i);
    return v;
}

FrequencyGrid FrequencyGrid::centered(double half_span_hz, double step_hz)
{
    if (!(half_span_hz > 0.0) || !(step_hz > 0.0))
        throw ValidationError("frequency grid span and step must be positive");
    const auto half = static_cast<std::size_t>(std::llround(half_span_hz / step_hz));
    return {-static_cast<double>(half) * step_hz, step_hz, 2 * half + 1};
}

double AbsorptionSpectrum::at(double f) const
{
    if (frequency_hz.empty())
        return 0.0;
    if (f <= frequency_hz.front())
        return optical_depth.front();
    if (f >= frequency_hz.back())
        return optical_depth.back();
    auto it = std::upper_bound(frequency_hz.begin(), frequency_hz.end(), f);
    const auto i = static_cast<std::size_t>(it - frequency_hz.begin());
    const double w = (f - frequency_hz[i - 1]) / (frequency_hz[i] - frequency_hz[i - 1]);
    return (1.0 - w) * optical_depth[i - 1] + w * optical_depth[i];
}

double AbsorptionSpectrum::peak() const
{
    return optical_depth.empty() ? 0.0 : *std::max_element(optical_depth.begin(), optical_depth.end());
}

double doppler_sigma_hz(const AtomSpec& atom, double temperature_k)
{
    if (temperature_k < 0.0)
        throw ValidationError("temperature must be non-negative");
    return std::sqrt(constants::boltzmann * temperature_k / atom.mass_kg) / atom.transition_wavelength_m;
}

double lorentz_fwhm_hz(const AtomSpec& atom, double buffer_broadening_hz)
{
    return atom.natural_linewidth_rad_s / constants::two_pi + buffer_broadening_hz;
}

double resonant_cross_section(const AtomSpec& atom)
{
    const double lambda = atom.transition_wavelength_m;
    return 3.0 * lambda * lambda / constants::two_pi;
}

namespace {

// Integrated cross-section (m^2 Hz) of a line of unit relative strength:
// sigma_0 * Gamma / 4, independent of any extra homogeneous broadening.
double integrated_cross_section(const AtomSpec& atom)
{
    return resonant_cross_section(atom) * atom.natural_linewidth_rad_s / 4.0;
}

void check(const VaporConditions& v)
{
    if (!(v.density_m3 >= 0.0))
        throw ValidationError("number density must be non-negative");
    if (!(v.path_length_m > 0.0))
        throw ValidationError("path length must be positive");
    if (!(v.buffer_broadening_hz >= 0.0))
        throw ValidationError("buffer broadening must be non-negative");
}

} // namespace

double line_optical_depth(const AtomSpec& atom, const TransitionLine& line, const VaporConditions& vapor,
                          double frequency_hz)
{
    check(vapor);
    const double sigma = doppler_sigma_hz(atom, vapor.temperature_k);
    const double gamma = 0.5 * lorentz_fwhm_hz(atom, vapor.buffer_broadening_hz);
    return vapor.density_m3 * vapor.path_length_m * line.dipole_strength * integrated_cross_section(atom) *
           voigt_profile(frequency_hz - line.frequency_offset_hz, sigma, gamma);
}

AbsorptionSpectrum voigt_absorption_spectrum(const AtomSpec& atom, std::span<const TransitionLine> lines,
                                             const VaporConditions& vapor, const FrequencyGrid& grid,
                                             double frequency_shift_hz)
{
    check(vapor);
    AbsorptionSpectrum out;
    out.frequency_hz = grid.values();
    out.optical_depth.assign(grid.size, 0.0);
    out.temperature_k = vapor.temperature_k;
    out.density_m3 = vapor.density_m3;
    out.buffer_broadening_hz = vapor.buffer_broadening_hz;
    if (vapor.density_m3 == 0.0)
        return out;

    const double sigma = doppler_sigma_hz(atom, vapor.temperature_k);
    const double gamma = 0.5 * lorentz_fwhm_hz(atom, vapor.buffer_broadening_hz);
    const double scale = vapor.density_m3 * vapor.path_length_m * integrated_cross_section(atom);
    for (const auto& line : lines) {
        const double center = line.frequency_offset_hz + frequency_shift_hz;
        const double amp = scale * line.dipole_strength;
        for (std::size_t i = 0; i < grid.size; ++i)
            out.optical_depth[i] += amp * voigt_profile(out.frequency_hz[i] - center, sigma, gamma);
    }
    return out;
}

AbsorptionSpectrum combine(const AbsorptionSpectrum& a, const AbsorptionSpectrum& b)
{
    if (a.frequency_hz != b.frequency_hz)
        throw ValidationError("spectra are on different frequency grids");
    AbsorptionSpectrum out = a;
    for (std::size_t i = 0; i < out.optical_depth.size(); ++i)
        out.optical_depth[i] += b.optical_depth[i];
    out.density_m3 = a.density_m3 + b.density_m3;
    return out;
}

void write_spectrum_csv(const AbsorptionSpectrum& spectrum, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw ValidationError("cannot write " + path.string());
    out << "frequency_hz,optical_depth\n" << std::setprecision(12);
    for (std::size_t i = 0; i < spectrum.frequency_hz.size(); ++i)
        out << spectrum.frequency_hz[i] << ',' << spectrum.optical_depth[i] << '\n';
}

} // namespace vqm
