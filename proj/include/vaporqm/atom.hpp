#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace vqm {

/// Hyperfine and Zeeman constants for one fine-structure level.
struct FineLevel {
    int two_j = 1;               ///< 2J
    double g_j = 0.0;
    double hyperfine_a_hz = 0.0; ///< magnetic-dipole constant A/h
    double hyperfine_b_hz = 0.0; ///< electric-quadrupole constant B/h (J >= 1 only)
};

/// log10(P/Torr) = a + b/T + c T + d log10(T)
struct VaporPressureBranch {
    double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
};

struct VaporPressureModel {
    double melting_point_k = 0.0;
    VaporPressureBranch solid;
    VaporPressureBranch liquid;
    double min_temperature_k = 250.0;
    double max_temperature_k = 500.0;
};

/// Species constants for one isotope and one optical line. Always loaded from a
/// constants file; nothing in the library hard-codes these numbers.
struct AtomSpec {
    std::string name;
    std::string version;
    std::string line;
    int two_i = 0; ///< 2I
    double g_i = 0.0;
    double mass_kg = 0.0;
    double transition_wavelength_m = 0.0;
    double transition_frequency_hz = 0.0;
    double natural_linewidth_rad_s = 0.0; ///< Gamma, full width of the excited state
    double isotope_abundance = 0.0;       ///< natural abundance, fraction
    FineLevel ground;
    FineLevel excited;
    VaporPressureModel vapor;
    std::map<std::string, double> buffer_broadening_hz_per_mbar; ///< FWHM per mbar, keyed by gas
    std::map<std::string, std::string> sources;

    double nuclear_spin() const { return 0.5 * two_i; }
};

/// Throws ValidationError when an invariant is violated.
void validate(const AtomSpec& atom);

AtomSpec load_atom(const std::filesystem::path& path);

/// Resolves `<data_dir>/constants/<name lowercased>.json`.
AtomSpec load_atom_by_name(std::string_view name,
                           const std::filesystem::path& data_dir = {});

/// $VQM_DATA_DIR if set, else the directory configured at build time.
std::filesystem::path default_data_dir();

/// Lorentzian FWHM (Hz) added by a buffer gas at the given pressure.
double buffer_broadening_hz(const AtomSpec& atom, std::string_view gas, double pressure_mbar);

} // namespace vqm
