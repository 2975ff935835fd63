#pragma once

#include "vaporqm/filters.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace vqm {

struct ScenarioConfig {
    struct Atom {
        std::string species;
        double field_tesla = 0.0;
        bool include_rb85 = false;
        bool operator==(const Atom&) const = default;
    };
    struct Cell {
        double length_m = 0.0;
        double temperature_k = 0.0;
        std::string buffer_gas;
        double buffer_pressure_mbar = 0.0;
        double enrichment = 0.0;
        bool operator==(const Cell&) const = default;
    };
    struct Populations {
        double polarization_in_g = 0.0;
        double manifold_fraction = 0.0;
        bool operator==(const Populations&) const = default;
    };
    struct Spectrum {
        double half_span_hz = 0.0;
        double step_hz = 0.0;
        double strength_floor = 0.0;
        bool operator==(const Spectrum&) const = default;
    };
    struct Signal {
        std::string source; ///< "template" or "file"
        std::string path;   ///< CSV time_s,re,im, relative to the scenario file
        double start_s = 0.0;
        double rise_s = 0.0;
        double decay_s = 0.0;
        double window_s = 0.0;
        bool operator==(const Signal&) const = default;
    };
    struct Control {
        double fwhm_s = 0.0;
        double peak_rabi_hz = 0.0; ///< Omega / 2 pi
        double center_s = 0.0;
        double readout_center_s = 0.0;
        double beam_factor = 1.0;
        bool operator==(const Control&) const = default;
    };
    struct Pulses {
        double alpha_sq = 0.0;
        double alpha_sq_sigma = 0.0;
        double detuning_hz = 0.0;
        double two_photon_detuning_hz = 0.0;
        Signal signal;
        Control control;
        bool operator==(const Pulses&) const = default;
    };
    struct Leakage {
        bool enabled = false;
        double ring_frequency_hz = 0.0;
        double decay_s = 0.0;
        double e2e_loss = 0.0;
        double e2e_reference = 0.0;
        bool operator==(const Leakage&) const = default;
    };
    struct OdCurve {
        std::vector<double> optical_depths;
        std::string method;
        int knots = 0;
        double peak_rabi_cap_hz = 0.0;
        int max_iterations = 0;
        double tolerance = 0.0;
        int z_points = 0;
        double time_step_s = 0.0;
        double detuning_hz = 0.0;
        bool include_decay = false;
        bool operator==(const OdCurve&) const = default;
    };
    struct Memory {
        double optical_depth = 0.0;
        std::optional<double> excited_decay_rad_s; ///< unset: natural plus buffer-gas HWHM
        double spinwave_lifetime_s = 0.0;
        double doppler_dephasing_rad_s = 0.0;
        int velocity_classes = 1;
        std::string retrieval;
        int z_points = 0;
        double time_step_s = 0.0;
        double storage_window_s = 0.0;
        double readout_window_s = 0.0;
        double hold_time_s = 0.0;
        Leakage leakage;
        OdCurve od_curve;
        bool operator==(const Memory&) const = default;
    };
    struct Etalon {
        double fsr_hz = 0.0;
        double fwhm_hz = 0.0;
        double peak_transmission = 1.0;
        double center_offset_hz = 0.0;
        bool operator==(const Etalon&) const = default;
    };
    struct Broadband {
        bool enabled = false;
        double center_hz = 0.0;
        double fwhm_hz = 0.0;
        double passband_transmission = 1.0;
        double floor_db = 0.0;
        bool operator==(const Broadband&) const = default;
    };
    struct Filters {
        std::vector<Etalon> etalons;
        Broadband broadband;
        double polarization_suppression_db = 0.0;
        double insertion_transmission = 1.0;
        double control_photons_per_pulse = 0.0;
        bool operator==(const Filters&) const = default;
    };
    struct Detectors {
        double eta_det = 0.0;
        double eta_det_hbt_sigma = 0.0;
        std::vector<int> channels;
        bool operator==(const Detectors&) const = default;
    };
    struct Run {
        double n_triggers = 0.0;
        double repetition_rate_hz = 0.0;
        double pumping_window_s = 0.0;
        std::vector<double> lifetime_hold_times_s;
        double lifetime_triggers = 0.0;
        bool operator==(const Run&) const = default;
    };
    struct Tags {
        std::string signal_source; ///< "memory" or "configured"
        double internal_efficiency = 0.0;
        double noise_counts_per_trigger = 0.0;
        double dark_counts_per_trigger_per_bin = 0.0;
        double offset_counts_per_trigger_per_bin = 0.0;
        double bin_width_s = 0.0;
        double record_start_s = 0.0;
        double record_end_s = 0.0;
        bool write_streams = false;
        bool operator==(const Tags&) const = default;
    };
    struct Window {
        double start_s = 0.0;
        double width_s = 0.0;
        bool operator==(const Window&) const = default;
    };
    struct Analysis {
        Window roi;
        Window quiet_region;
        double bin_width_s = 0.0;
        std::string lifetime_model;
        double lifetime_scale_factor = 1.0;
        std::string lifetime_scale_note;
        bool operator==(const Analysis&) const = default;
    };
    struct Seeds {
        std::uint64_t tags = 0;
        std::uint64_t lifetime = 0;
        bool operator==(const Seeds&) const = default;
    };

    std::string name;
    std::string description;
    Atom atom;
    Cell cell;
    Populations populations;
    Spectrum spectrum;
    Pulses pulses;
    Memory memory;
    Filters filters;
    Detectors detectors;
    Run run;
    Tags tags;
    Analysis analysis;
    Seeds seeds;

    /// Where each leaf came from: "config" or "default".
    nlohmann::json provenance;
    /// Directory used to resolve relative paths.
    std::filesystem::path base_dir;

    bool operator==(const ScenarioConfig& o) const; ///< compares values, not provenance

    FilterChain filter_chain() const;
    nlohmann::json to_json() const;
};

/// Validate against the schema, fill defaults and record their provenance.
/// Throws ValidationError naming the offending field path.
ScenarioConfig resolve_scenario(const nlohmann::json& document, const std::filesystem::path& base_dir = {});
ScenarioConfig load_scenario(const std::filesystem::path& path);
void save_scenario(const ScenarioConfig& config, const std::filesystem::path& path);

/// Path of a bundled scenario under <data dir>/scenarios.
std::filesystem::path bundled_scenario(std::string_view name);

} // namespace vqm
