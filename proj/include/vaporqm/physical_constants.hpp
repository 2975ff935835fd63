#pragma once

#include <numbers>

// CODATA 2018. Species-specific values live in data/constants/*.json.
namespace vqm::constants {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;
inline constexpr double speed_of_light = 299792458.0;             // m/s
inline constexpr double boltzmann = 1.380649e-23;                 // J/K
inline constexpr double bohr_magneton_hz_per_tesla = 1.39962449361e10;
inline constexpr double torr_in_pascal = 133.322368421;
inline constexpr double mbar_in_pascal = 100.0;

} // namespace vqm::constants
