#pragma once

#include <complex>

namespace vqm {

/// Faddeeva function w(z) = exp(-z^2) erfc(-iz) for Im z >= 0, relative
/// accuracy better than 1e-10 (Weideman rational series, continued fraction
/// for large |z|). Im z < 0 uses the reflection w(z) = 2 exp(-z^2) - w(-z).
std::complex<double> faddeeva(std::complex<double> z);

/// Area-normalized Voigt profile (1/Hz) at detuning `x_hz` for a Gaussian of
/// standard deviation `sigma_hz` and a Lorentzian of half-width `gamma_hz`.
/// Either width may be zero (pure Lorentzian / pure Gaussian), not both.
double voigt_profile(double x_hz, double sigma_hz, double gamma_hz);

} // namespace vqm
