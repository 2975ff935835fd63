#pragma once

#include "vaporqm/atom.hpp"

#include <Eigen/Dense>

#include <string_view>
#include <vector>

namespace vqm {

enum class Manifold { ground, excited };

Manifold parse_manifold(std::string_view name);
std::string_view to_string(Manifold manifold);

/// Uncoupled basis state |m_I, m_J>, stored as twice the projections.
struct BasisState {
    int two_mi = 0;
    int two_mj = 0;
    int two_mf() const { return two_mi + two_mj; }
    bool operator==(const BasisState&) const = default;
};

/// Hyperfine + Zeeman Hamiltonian (Hz) of one fine-structure level in the
/// |m_I, m_J> basis. Real symmetric and block diagonal in m_F.
struct ManifoldHamiltonian {
    Manifold manifold = Manifold::ground;
    double field_tesla = 0.0;
    int two_i = 0;
    int two_j = 0;
    std::vector<BasisState> basis;
    Eigen::MatrixXd matrix;

    std::size_t index_of(BasisState state) const;
};

ManifoldHamiltonian build_hamiltonian(const AtomSpec& atom, Manifold manifold, double field_tesla);

struct ZeemanEigenstate {
    double energy_hz = 0.0;         ///< relative to the manifold centroid
    int two_mf = 0;
    int two_mj = 0;                 ///< adiabatic high-field label
    int two_mi = 0;                 ///< adiabatic high-field label
    double mean_iz = 0.0;           ///< <I_z>
    Eigen::VectorXd composition;    ///< amplitudes over ManifoldHamiltonian::basis

    /// Basis state carrying the largest weight.
    std::size_t dominant_component() const;
};

/// Eigenstates sorted by energy; exact degeneracies ordered by <I_z> descending.
/// Labels come from adiabatic continuation: inside each m_F block the k-th
/// lowest level connects to the k-th lowest m_J (no crossings within a block).
std::vector<ZeemanEigenstate> diagonalize_manifold(const ManifoldHamiltonian& hamiltonian);

/// Lookup by adiabatic label; throws ValidationError when absent.
const ZeemanEigenstate& find_state(const std::vector<ZeemanEigenstate>& states, int two_mj, int two_mi);

} // namespace vqm
