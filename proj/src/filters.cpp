#include "vaporqm/filters.hpp"

#include "csv.hpp"
#include "vaporqm/errors.hpp"
#include "vaporqm/physical_constants.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

namespace vqm {

void EtalonSpec::validate() const
{
    if (!(free_spectral_range_hz > 0.0) || !std::isfinite(free_spectral_range_hz))
        throw ValidationError("etalon free spectral range must be positive");
    if (!(fwhm_hz > 0.0 && fwhm_hz < free_spectral_range_hz))
        throw ValidationError("etalon FWHM must lie in (0, FSR)");
    if (!(peak_transmission > 0.0 && peak_transmission <= 1.0))
        throw ValidationError("etalon peak transmission must lie in (0, 1]");
    if (!std::isfinite(center_offset_hz))
        throw ValidationError("etalon center offset must be finite");
}

double etalon_transmission(const EtalonSpec& spec, double detuning_hz)
{
    const double coeff = 2.0 * spec.finesse() / constants::pi;
    const double s = std::sin(constants::pi * (detuning_hz - spec.center_offset_hz) / spec.free_spectral_range_hz);
    return spec.peak_transmission / (1.0 + coeff * coeff * s * s);
}

void InterferenceFilter::validate() const
{
    if (!(fwhm_hz > 0.0))
        throw ValidationError("interference filter bandwidth must be positive");
    if (!(passband_transmission > 0.0 && passband_transmission <= 1.0))
        throw ValidationError("interference filter transmission must lie in (0, 1]");
    if (!(floor_db >= 0.0))
        throw ValidationError("interference filter floor must be a non-negative dB magnitude");
}

double InterferenceFilter::transmission(double detuning_hz) const
{
    if (std::abs(detuning_hz - center_hz) <= 0.5 * fwhm_hz)
        return passband_transmission;
    return passband_transmission * from_db(-floor_db);
}

void FilterChain::validate() const
{
    for (const auto& e : etalons)
        e.validate();
    if (broadband)
        broadband->validate();
    if (!(polarization_suppression_db >= 0.0) || !std::isfinite(polarization_suppression_db))
        throw ValidationError("polarization suppression is a non-negative dB magnitude");
}

double FilterChain::spectral_transmission(double detuning_hz) const
{
    double t = broadband ? broadband->transmission(detuning_hz) : 1.0;
    for (const auto& e : etalons)
        t *= etalon_transmission(e, detuning_hz);
    return t;
}

double to_db(double fraction)
{
    return 10.0 * std::log10(fraction);
}

double from_db(double db)
{
    return std::pow(10.0, db / 10.0);
}

void AmplitudeSpectrum::validate() const
{
    if (frequency_hz.size() != amplitude.size())
        throw ValidationError("spectrum frequency and amplitude lengths differ");
    for (std::size_t i = 1; i < frequency_hz.size(); ++i)
        if (!(frequency_hz[i] > frequency_hz[i - 1]))
            throw ValidationError("spectrum frequencies must be strictly increasing");
    for (const auto& a : amplitude)
        if (!std::isfinite(a.real()) || !std::isfinite(a.imag()))
            throw ValidationError("spectrum amplitudes must be finite");
}

double AmplitudeSpectrum::power() const
{
    double sum = 0.0;
    for (std::size_t i = 1; i < frequency_hz.size(); ++i)
        sum += 0.5 * (std::norm(amplitude[i]) + std::norm(amplitude[i - 1])) * (frequency_hz[i] - frequency_hz[i - 1]);
    if (frequency_hz.size() == 1)
        sum = std::norm(amplitude[0]);
    return sum;
}

TransmissionCurve sample_chain(const FilterChain& chain, const std::vector<double>& frequency_hz)
{
    chain.validate();
    TransmissionCurve c{frequency_hz, {}};
    c.transmission.reserve(frequency_hz.size());
    for (double f : frequency_hz)
        c.transmission.push_back(chain.spectral_transmission(f));
    return c;
}

ChainOutput chain_transmission(const TransmissionCurve& curve, const AmplitudeSpectrum& spectrum)
{
    spectrum.validate();
    if (curve.frequency_hz.size() != spectrum.frequency_hz.size() ||
        curve.transmission.size() != curve.frequency_hz.size())
        throw ValidationError("grid mismatch: transmission curve and spectrum differ in length");
    for (std::size_t i = 0; i < curve.frequency_hz.size(); ++i) {
        const double f = spectrum.frequency_hz[i];
        if (std::abs(curve.frequency_hz[i] - f) > 1e-9 * std::max(1.0, std::abs(f)))
            throw ValidationError("grid mismatch at sample " + std::to_string(i));
    }
    ChainOutput out;
    out.transmitted = spectrum;
    for (std::size_t i = 0; i < spectrum.amplitude.size(); ++i)
        out.transmitted.amplitude[i] *= std::sqrt(curve.transmission[i]);
    const double in = spectrum.power();
    out.power_transmission = in > 0.0 ? out.transmitted.power() / in : 0.0;
    return out;
}

ChainOutput chain_transmission(const FilterChain& chain, const AmplitudeSpectrum& spectrum)
{
    return chain_transmission(sample_chain(chain, spectrum.frequency_hz), spectrum);
}

double passive_transmission(const FilterChain& chain, double insertion_transmission)
{
    if (!(insertion_transmission > 0.0 && insertion_transmission <= 1.0))
        throw ValidationError("insertion transmission must lie in (0, 1]");
    chain.validate();
    return chain.spectral_transmission(0.0) * insertion_transmission;
}

SuppressionBudget control_suppression_budget(const FilterChain& chain, double control_photons,
                                             double control_offset_hz)
{
    chain.validate();
    if (!(control_photons >= 0.0) || !std::isfinite(control_photons))
        throw ValidationError("control photon number must be finite and non-negative");
    SuppressionBudget b;
    b.control_photons = control_photons;
    b.polarization_db = chain.polarization_suppression_db;
    b.spectral_db = 0.0;
    if (chain.broadband)
        b.spectral_db -= to_db(chain.broadband->transmission(control_offset_hz));
    for (const auto& e : chain.etalons)
        b.spectral_db -= to_db(etalon_transmission(e, control_offset_hz));
    b.total_db = b.polarization_db + b.spectral_db;
    b.residual_photons = control_photons * from_db(-b.total_db);
    return b;
}

AmplitudeSpectrum read_amplitude_csv(const std::filesystem::path& path)
{
    AmplitudeSpectrum s;
    for (const auto& row : detail::read_numeric_csv(path, "frequency_hz,re,im")) {
        s.frequency_hz.push_back(row[0]);
        s.amplitude.emplace_back(row[1], row[2]);
    }
    s.validate();
    return s;
}

void write_amplitude_csv(const AmplitudeSpectrum& spectrum, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw ValidationError("cannot write " + path.string());
    out << "frequency_hz,re,im\n" << std::setprecision(15);
    for (std::size_t i = 0; i < spectrum.frequency_hz.size(); ++i)
        out << spectrum.frequency_hz[i] << ',' << spectrum.amplitude[i].real() << ','
            << spectrum.amplitude[i].imag() << '\n';
}

TransmissionCurve read_power_csv(const std::filesystem::path& path)
{
    TransmissionCurve c;
    for (const auto& row : detail::read_numeric_csv(path, "frequency_hz,power")) {
        if (!(row[1] >= 0.0))
            throw ValidationError(path.string() + ": power must be non-negative");
        c.frequency_hz.push_back(row[0]);
        c.transmission.push_back(row[1]);
    }
    return c;
}

void write_power_csv(const std::vector<double>& frequency_hz, const std::vector<double>& power,
                     const std::filesystem::path& path)
{
    if (frequency_hz.size() != power.size())
        throw ValidationError("frequency and power lengths differ");
    std::ofstream out(path);
    if (!out)
        throw ValidationError("cannot write " + path.string());
    out << "frequency_hz,power\n" << std::setprecision(15);
    for (std::size_t i = 0; i < power.size(); ++i)
        out << frequency_hz[i] << ',' << power[i] << '\n';
}

} // namespace vqm
