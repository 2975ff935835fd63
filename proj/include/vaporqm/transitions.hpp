#pragma once

#include "vaporqm/zeeman.hpp"

#include <string_view>
#include <vector>

namespace vqm {

/// Polarization relative to the quantization axis (the static field):
/// pi drives Delta m = 0, sigma+/- drive Delta m = +/-1 in absorption.
enum class Polarization { pi, sigma_plus, sigma_minus };

std::string_view to_string(Polarization p);
int delta_m(Polarization p);

struct PolarizationFilter {
    bool pi = true;
    bool sigma_plus = true;
    bool sigma_minus = true;

    bool accepts(Polarization p) const;
    static PolarizationFilter only(Polarization p);
};

struct TransitionLine {
    double frequency_offset_hz = 0.0; ///< relative to the zero-field line center
    double dipole_strength = 0.0;     ///< |<e|d_q|g>|^2 relative to the stretched D2 line
    Polarization polarization = Polarization::pi;
    ZeemanEigenstate lower;
    ZeemanEigenstate upper;
};

/// <j1 m1; j2 m2 | j m>, all arguments doubled.
double clebsch_gordan(int two_j1, int two_m1, int two_j2, int two_m2, int two_j, int two_m);

/// Both manifolds diagonalized at one field, with every electric-dipole matrix element.
struct LevelStructure {
    double field_tesla = 0.0;
    ManifoldHamiltonian ground_hamiltonian;
    ManifoldHamiltonian excited_hamiltonian;
    std::vector<ZeemanEigenstate> ground;
    std::vector<ZeemanEigenstate> excited;
};

LevelStructure level_structure(const AtomSpec& atom, double field_tesla);

/// Relative line strength between two eigenstates for one polarization component.
double dipole_strength(const LevelStructure& levels, const ZeemanEigenstate& lower,
                       const ZeemanEigenstate& upper, Polarization polarization);

/// All allowed lines with strength above `strength_floor`, sorted by frequency.
std::vector<TransitionLine> transition_table(const AtomSpec& atom, double field_tesla,
                                             PolarizationFilter filter = {},
                                             double strength_floor = 1e-6);

std::vector<TransitionLine> transition_table(const LevelStructure& levels,
                                             PolarizationFilter filter = {},
                                             double strength_floor = 1e-6);

/// First line matching the adiabatic labels of both states.
const TransitionLine& find_line(const std::vector<TransitionLine>& lines, int lower_two_mj,
                                int lower_two_mi, int upper_two_mj, int upper_two_mi);

} // namespace vqm
