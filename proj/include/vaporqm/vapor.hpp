#pragma once

#include "vaporqm/atom.hpp"

namespace vqm {

/// Saturated vapor pressure (Pa) from the species' two-branch model.
/// Throws ValidationError outside the model's validity range.
double vapor_pressure_pa(const AtomSpec& atom, double temperature_k);

/// Number density (m^-3) of the isotope in the selected nuclear-spin manifold:
/// ideal-gas density of the saturated vapor times enrichment times manifold fraction.
double number_density(const AtomSpec& atom, double temperature_k, double enrichment,
                      double manifold_fraction);

} // namespace vqm
