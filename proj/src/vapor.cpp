#include "vaporqm/vapor.hpp"

#include "vaporqm/errors.hpp"
#include "vaporqm/physical_constants.hpp"

#include <cmath>
#include <string>

namespace vqm {

double vapor_pressure_pa(const AtomSpec& atom, double temperature_k)
{
    const auto& vp = atom.vapor;
    if (!(temperature_k > vp.min_temperature_k && temperature_k < vp.max_temperature_k))
        throw ValidationError("temperature " + std::to_string(temperature_k) +
                              " K outside vapor-pressure model range (" +
                              std::to_string(vp.min_temperature_k) + ", " +
                              std::to_string(vp.max_temperature_k) + ") K");
    const auto& c = temperature_k < vp.melting_point_k ? vp.solid : vp.liquid;
    const double log10_torr = c.a + c.b / temperature_k + c.c * temperature_k + c.d * std::log10(temperature_k);
    return std::pow(10.0, log10_torr) * constants::torr_in_pascal;
}

double number_density(const AtomSpec& atom, double temperature_k, double enrichment,
                      double manifold_fraction)
{
    if (!(enrichment >= 0.0 && enrichment <= 1.0))
        throw ValidationError("enrichment must lie in [0, 1]");
    if (!(manifold_fraction >= 0.0 && manifold_fraction <= 1.0))
        throw ValidationError("manifold fraction must lie in [0, 1]");
    const double total = vapor_pressure_pa(atom, temperature_k) / (constants::boltzmann * temperature_k);
    return total * enrichment * manifold_fraction;
}

} // namespace vqm
