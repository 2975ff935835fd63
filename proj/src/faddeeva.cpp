#include "vaporqm/faddeeva.hpp"

#include "vaporqm/errors.hpp"

#include <array>
#include <cmath>
#include <numbers>

namespace vqm {

namespace {

constexpr int kTerms = 40;

struct WeidemanSeries {
    double l = 0.0;
    std::array<double, kTerms> a{};

    WeidemanSeries()
    {
        constexpr int m = 2 * kTerms;
        l = std::sqrt(kTerms / std::numbers::sqrt2);
        auto g = [&](int k) {
            const double t = l * std::tan(0.5 * k * std::numbers::pi / m);
            return std::exp(-t * t) * (l * l + t * t);
        };
        for (int n = 1; n <= kTerms; ++n) {
            double sum = g(0);
            for (int k = 1; k < m; ++k)
                sum += 2.0 * g(k) * std::cos(std::numbers::pi * k * n / m);
            a[static_cast<std::size_t>(n - 1)] = sum / (2.0 * m);
        }
    }
};

const WeidemanSeries& series()
{
    static const WeidemanSeries s;
    return s;
}

std::complex<double> continued_fraction(std::complex<double> z)
{
    constexpr int depth = 40;
    std::complex<double> tail = z;
    for (int k = depth; k >= 1; --k)
        tail = z - (0.5 * k) / tail;
    return std::complex<double>(0.0, 1.0 / std::sqrt(std::numbers::pi)) / tail;
}

std::complex<double> upper_half_plane(std::complex<double> z)
{
    if (std::abs(z) > 12.0)
        return continued_fraction(z);
    const auto& s = series();
    const std::complex<double> i(0.0, 1.0);
    const std::complex<double> denom = s.l - i * z;
    const std::complex<double> big_z = (s.l + i * z) / denom;
    std::complex<double> p = 0.0;
    for (int n = kTerms - 1; n >= 0; --n)
        p = p * big_z + s.a[static_cast<std::size_t>(n)];
    return 2.0 * p / (denom * denom) + 1.0 / (std::sqrt(std::numbers::pi) * denom);
}

} // namespace

std::complex<double> faddeeva(std::complex<double> z)
{
    if (z.imag() >= 0.0)
        return upper_half_plane(z);
    return 2.0 * std::exp(-z * z) - upper_half_plane(-z);
}

double voigt_profile(double x_hz, double sigma_hz, double gamma_hz)
{
    if (sigma_hz < 0.0 || gamma_hz < 0.0 || (sigma_hz == 0.0 && gamma_hz == 0.0))
        throw ValidationError("Voigt profile needs non-negative widths, at least one positive");
    if (sigma_hz == 0.0)
        return gamma_hz / (std::numbers::pi * (x_hz * x_hz + gamma_hz * gamma_hz));
    const double s = sigma_hz * std::numbers::sqrt2;
    const std::complex<double> z(x_hz / s, gamma_hz / s);
    return faddeeva(z).real() / (sigma_hz * std::sqrt(2.0 * std::numbers::pi));
}

} // namespace vqm
