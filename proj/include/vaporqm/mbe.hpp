#pragma once

#include "vaporqm/pulse.hpp"

#include <Eigen/Dense>

#include <complex>
#include <limits>
#include <vector>

namespace vqm {

enum class RetrievalDirection { forward, backward };

/// Reduced three-level (lambda) problem in the co-moving frame. Conventions
/// (see docs/NOTATION.md):
///   dE/dz = i k P,   k = sqrt(d gamma / 2),  z in [0, 1]
///   dP/dt = -(gamma + i Delta) P + i k E + i (Omega/2) S
///   dS/dt = -(1/(2 tau) + i delta) S + i (Omega*/2) P
/// so a weak probe is transmitted as exp(-d L(Delta)) in intensity and the
/// spin-wave excitation decays as exp(-t/tau).
struct LambdaParams {
    double detuning_rad_s = -2.0 * 3.14159265358979323846 * 750e6; ///< Delta, signal from |e>
    double optical_depth = 2.0;              ///< d, resonant intensity OD of the |g>-|e> leg
    double excited_decay_rad_s = 4.84e8;     ///< gamma, optical coherence decay (HWHM, rad/s)
    double spinwave_lifetime_s = 224e-9;     ///< tau (1/e of the stored excitation); inf disables
    double two_photon_detuning_rad_s = 0.0;  ///< delta
    double doppler_dephasing_rad_s = 0.0;    ///< extra coherence decay in single-class mode
    std::size_t velocity_classes = 1;        ///< >1 resolves the Doppler distribution explicitly
    double doppler_sigma_rad_s = 0.0;        ///< Gaussian rms of k v, used when velocity_classes > 1
    RetrievalDirection retrieval = RetrievalDirection::forward;

    void validate() const;
    double spinwave_amplitude_decay() const;
};

struct SolverOptions {
    std::size_t z_points = 201;
    std::size_t substeps = 0;      ///< per pulse-grid step; 0 picks the smallest stable count
    double stability_factor = 0.1; ///< dt <= factor / max rate
    bool record_fields = false;
};

/// Largest allowed internal step for the given parameters and peak Rabi frequency.
double max_stable_step(const LambdaParams& params, double peak_rabi_rad_s, double stability_factor = 0.1);

/// Atomic amplitudes per velocity class on the z grid.
struct MediumState {
    std::vector<Eigen::VectorXcd> polarization;
    std::vector<Eigen::VectorXcd> spinwave;

    /// sum over classes of the trapezoid integral of |S|^2 dz
    double spinwave_excitation() const;
    double polarization_excitation() const;
    /// sum_v sqrt(w_v) S_v(z); equals S(z) for a single class
    Eigen::VectorXcd collective_spinwave(const LambdaParams& params) const;
};

struct FieldGrid {
    std::vector<double> z;
    TimeGrid t;
    Eigen::MatrixXcd signal;       ///< E(t, z), filled when recording
    Eigen::MatrixXcd polarization; ///< collective P(t, z)
    Eigen::MatrixXcd spinwave;     ///< collective S(t, z)
    MediumState final_state;

    // bookkeeping carried to later stages
    double input_photons = 0.0;
    double eta_storage = 0.0;
    double stored_excitation = 0.0;
    double unintentional_readout_fraction = 0.0;
};

struct MemoryResult {
    double input_photons = 0.0;
    double eta_storage = 0.0;
    double eta_retrieval = 0.0;
    double eta_internal_total = 0.0;
    double decay_factor = 1.0; ///< excitation at readout / excitation at end of storage
    double unintentional_readout_fraction = 0.0;
    PulseShape leaked_pulse;
    PulseShape retrieved_pulse;
    PulseShape unintentional_pulse;
    std::vector<double> z;
    std::vector<std::complex<double>> spinwave_snapshot;
};

struct StorageRun {
    MemoryResult result;
    FieldGrid fields;
};

struct HoldRun {
    MemoryResult result;
    FieldGrid fields;
};

/// Store `signal_in` (photon-flux normalized) with `control` (Rabi frequency).
/// Both pulses must share one time grid; the run ends at the last grid point.
StorageRun simulate_storage(const LambdaParams& params, const PulseShape& signal_in, const PulseShape& control,
                            const SolverOptions& options = {});

/// Free evolution for `hold_time_s`, then readout with `control`.
MemoryResult simulate_retrieval(const FieldGrid& stored, const LambdaParams& params, const PulseShape& control,
                                double hold_time_s, const SolverOptions& options = {});

/// Integrate the hold with a weak leakage control and report the fraction of
/// the stored excitation emitted forward during the hold.
HoldRun apply_control_leakage(const FieldGrid& stored, const LambdaParams& params, const PulseShape& leakage,
                              const SolverOptions& options = {});

/// Scale factor for `leakage` such that the unintentional readout fraction
/// equals `target_fraction` (bisection in log amplitude).
double calibrate_leakage_scale(const FieldGrid& stored, const LambdaParams& params, const PulseShape& leakage,
                               double target_fraction, const SolverOptions& options = {});

/// Forward-retrieval efficiency of spin wave S under complete readout with
/// no spin decay: the closed-form kernel (d'/2) exp(-d'(x+x')/2) I0(d' sqrt(x x'))
/// with d' = d/2 and x = 1 - z the distance to the exit face.
double complete_readout_efficiency(const std::vector<double>& z, const Eigen::VectorXcd& spinwave,
                                   double optical_depth, RetrievalDirection direction = RetrievalDirection::forward);

/// The readout kernel as a matrix including trapezoid weights, so that the
/// efficiency is S^H K S / (S^H W S).
Eigen::MatrixXcd complete_readout_kernel(const std::vector<double>& z, double optical_depth,
                                         RetrievalDirection direction = RetrievalDirection::forward);

/// Trapezoid weights for a uniform grid on [0, 1].
Eigen::VectorXd trapezoid_weights(std::size_t n);

} // namespace vqm
