#include "vaporqm/pulse.hpp"

#include "vaporqm/errors.hpp"
#include "vaporqm/physical_constants.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace vqm {

TimeGrid TimeGrid::spanning(double start_s, double end_s, double max_step_s)
{
    if (!(end_s > start_s) || !(max_step_s > 0.0))
        throw ValidationError("time grid needs end > start and a positive step");
    const auto intervals = static_cast<std::size_t>(std::ceil((end_s - start_s) / max_step_s - 1e-9));
    return {start_s, (end_s - start_s) / static_cast<double>(intervals), intervals + 1};
}

double PulseShape::energy() const
{
    if (samples.size() < 2)
        return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double w = (i == 0 || i + 1 == samples.size()) ? 0.5 : 1.0;
        sum += w * std::norm(samples[i]);
    }
    return sum * grid.step_s;
}

double PulseShape::peak() const
{
    double p = 0.0;
    for (const auto& s : samples)
        p = std::max(p, std::abs(s));
    return p;
}

std::complex<double> PulseShape::at(double t) const
{
    if (samples.empty() || t < grid.start_s || t > grid.end_s())
        return 0.0;
    const double x = (t - grid.start_s) / grid.step_s;
    auto i = static_cast<std::size_t>(x);
    if (i + 1 >= samples.size())
        return samples.back();
    const double w = x - static_cast<double>(i);
    return (1.0 - w) * samples[i] + w * samples[i + 1];
}

PulseShape PulseShape::scaled(std::complex<double> factor) const
{
    PulseShape out = *this;
    for (auto& s : out.samples)
        s *= factor;
    return out;
}

void PulseShape::validate() const
{
    if (samples.size() != grid.size)
        throw ValidationError("pulse sample count does not match its time grid");
    if (!(grid.step_s > 0.0) || !std::isfinite(grid.step_s))
        throw ValidationError("pulse time grid must be strictly increasing");
    for (const auto& s : samples)
        if (!std::isfinite(s.real()) || !std::isfinite(s.imag()))
            throw ValidationError("pulse envelope contains non-finite samples");
}

PulseShape normalized(const PulseShape& pulse, double photons)
{
    if (photons < 0.0)
        throw ValidationError("photon number must be non-negative");
    const double e = pulse.energy();
    if (e <= 0.0) {
        if (photons == 0.0)
            return pulse;
        throw ValidationError("cannot normalize an all-zero pulse");
    }
    return pulse.scaled(std::sqrt(photons / e));
}

PulseShape gaussian_control(const TimeGrid& grid, double center_s, double fwhm_s, double peak_rabi_rad_s)
{
    if (!(fwhm_s > 0.0))
        throw ValidationError("control FWHM must be positive");
    PulseShape p{grid, std::vector<std::complex<double>>(grid.size)};
    // intensity FWHM -> field envelope exp(-2 ln2 (t/fwhm)^2)
    const double k = 2.0 * std::log(2.0) / (fwhm_s * fwhm_s);
    for (std::size_t i = 0; i < grid.size; ++i) {
        const double dt = grid.at(i) - center_s;
        p.samples[i] = peak_rabi_rad_s * std::exp(-k * dt * dt);
    }
    return p;
}

PulseShape signal_template(const TimeGrid& grid, double start_s, double photons, double rise_s,
                           double decay_s, double window_s)
{
    if (!(rise_s > 0.0) || !(decay_s > 0.0) || !(window_s > 0.0))
        throw ValidationError("signal template times must be positive");
    PulseShape p{grid, std::vector<std::complex<double>>(grid.size)};
    for (std::size_t i = 0; i < grid.size; ++i) {
        const double s = grid.at(i) - start_s;
        if (s < 0.0 || s > window_s)
            continue;
        const double intensity = (1.0 - std::exp(-s / rise_s)) * std::exp(-s / decay_s);
        p.samples[i] = std::sqrt(intensity);
    }
    return normalized(p, photons);
}

PulseShape decaying_sinusoid(const TimeGrid& grid, double start_s, double amplitude_rad_s,
                             double ring_frequency_hz, double decay_s)
{
    if (!(decay_s > 0.0))
        throw ValidationError("leakage decay time must be positive");
    PulseShape p{grid, std::vector<std::complex<double>>(grid.size)};
    for (std::size_t i = 0; i < grid.size; ++i) {
        const double s = grid.at(i) - start_s;
        if (s < 0.0)
            continue;
        p.samples[i] = amplitude_rad_s * std::exp(-s / decay_s) * std::sin(constants::two_pi * ring_frequency_hz * s);
    }
    return p;
}

PulseShape read_pulse_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open pulse file " + path.string());
    std::string line;
    std::getline(in, line);
    if (line.rfind("time_s,re,im", 0) != 0)
        throw ValidationError(path.string() + ": expected header time_s,re,im");
    std::vector<double> t;
    std::vector<std::complex<double>> v;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty())
            continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        double ts, re, im;
        if (!(ss >> ts >> re >> im))
            throw ValidationError(path.string() + ":" + std::to_string(row) + ": malformed row");
        t.push_back(ts);
        v.emplace_back(re, im);
    }
    if (t.size() < 2)
        throw ValidationError(path.string() + ": need at least two samples");
    const double step = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
    for (std::size_t i = 1; i < t.size(); ++i) {
        if (std::abs((t[i] - t[i - 1]) - step) > 1e-6 * step)
            throw ValidationError(path.string() + ": time grid must be uniform and increasing");
    }
    PulseShape p{{t.front(), step, t.size()}, std::move(v)};
    p.validate();
    return p;
}

void write_pulse_csv(const PulseShape& pulse, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw ValidationError("cannot write " + path.string());
    out << "time_s,re,im\n" << std::setprecision(15);
    for (std::size_t i = 0; i < pulse.samples.size(); ++i)
        out << pulse.grid.at(i) << ',' << pulse.samples[i].real() << ',' << pulse.samples[i].imag() << '\n';
}

} // namespace vqm
