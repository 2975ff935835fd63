#include "vaporqm/zeeman.hpp"

#include "vaporqm/errors.hpp"
#include "vaporqm/physical_constants.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace vqm {

Manifold parse_manifold(std::string_view name)
{
    if (name == "ground")
        return Manifold::ground;
    if (name == "excited")
        return Manifold::excited;
    throw ValidationError("unknown manifold '" + std::string(name) + "' (expected ground or excited)");
}

std::string_view to_string(Manifold manifold)
{
    return manifold == Manifold::ground ? "ground" : "excited";
}

std::size_t ManifoldHamiltonian::index_of(BasisState state) const
{
    auto it = std::find(basis.begin(), basis.end(), state);
    if (it == basis.end())
        throw ValidationError("basis state not in manifold");
    return static_cast<std::size_t>(it - basis.begin());
}

namespace {

// sqrt(j(j+1) - m(m+1)) with all arguments doubled.
double ladder_up(int two_j, int two_m)
{
    const double j = 0.5 * two_j, m = 0.5 * two_m;
    return std::sqrt(std::max(0.0, j * (j + 1.0) - m * (m + 1.0)));
}

} // namespace

ManifoldHamiltonian build_hamiltonian(const AtomSpec& atom, Manifold manifold, double field_tesla)
{
    if (!(field_tesla >= 0.0) || !std::isfinite(field_tesla))
        throw ValidationError("magnetic field magnitude must be finite and non-negative");

    const FineLevel& level = manifold == Manifold::ground ? atom.ground : atom.excited;
    ManifoldHamiltonian h;
    h.manifold = manifold;
    h.field_tesla = field_tesla;
    h.two_i = atom.two_i;
    h.two_j = level.two_j;
    for (int two_mi = atom.two_i; two_mi >= -atom.two_i; two_mi -= 2)
        for (int two_mj = level.two_j; two_mj >= -level.two_j; two_mj -= 2)
            h.basis.push_back({two_mi, two_mj});

    const auto n = static_cast<Eigen::Index>(h.basis.size());
    Eigen::MatrixXd idotj = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd zeeman = Eigen::MatrixXd::Zero(n, n);
    const double mu_b = constants::bohr_magneton_hz_per_tesla * field_tesla;

    for (Eigen::Index a = 0; a < n; ++a) {
        const BasisState s = h.basis[a];
        idotj(a, a) = 0.25 * s.two_mi * s.two_mj;
        zeeman(a, a) = mu_b * (level.g_j * 0.5 * s.two_mj + atom.g_i * 0.5 * s.two_mi);
        // (I+ J- + I- J+)/2 couples |mi, mj> to |mi+1, mj-1>
        if (s.two_mi + 2 <= h.two_i && s.two_mj - 2 >= -h.two_j) {
            const auto b = static_cast<Eigen::Index>(h.index_of({s.two_mi + 2, s.two_mj - 2}));
            const double v = 0.5 * ladder_up(h.two_i, s.two_mi) * ladder_up(h.two_j, s.two_mj - 2);
            idotj(a, b) = v;
            idotj(b, a) = v;
        }
    }

    h.matrix = level.hyperfine_a_hz * idotj + zeeman;

    const double i = 0.5 * h.two_i, j = 0.5 * h.two_j;
    if (level.hyperfine_b_hz != 0.0 && h.two_i >= 2 && h.two_j >= 2) {
        const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
        const Eigen::MatrixXd q = 3.0 * idotj * idotj + 1.5 * idotj - i * (i + 1.0) * j * (j + 1.0) * id;
        h.matrix += level.hyperfine_b_hz * q / (2.0 * i * (2.0 * i - 1.0) * j * (2.0 * j - 1.0));
    }
    return h;
}

std::size_t ZeemanEigenstate::dominant_component() const
{
    Eigen::Index idx = 0;
    composition.cwiseAbs().maxCoeff(&idx);
    return static_cast<std::size_t>(idx);
}

std::vector<ZeemanEigenstate> diagonalize_manifold(const ManifoldHamiltonian& h)
{
    const Eigen::MatrixXd& m = h.matrix;
    const auto n = m.rows();
    if (m.cols() != n || n != static_cast<Eigen::Index>(h.basis.size()))
        throw ValidationError("Hamiltonian shape does not match its basis");
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if (!m.allFinite())
        throw NumericalError("Hamiltonian contains non-finite entries");
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw ValidationError("Hamiltonian is not Hermitian");

    std::map<int, std::vector<Eigen::Index>> blocks;
    for (Eigen::Index a = 0; a < n; ++a)
        blocks[h.basis[a].two_mf()].push_back(a);

    std::vector<ZeemanEigenstate> states;
    states.reserve(static_cast<std::size_t>(n));
    for (const auto& [two_mf, idx] : blocks) {
        const auto k = static_cast<Eigen::Index>(idx.size());
        Eigen::MatrixXd block(k, k);
        for (Eigen::Index r = 0; r < k; ++r)
            for (Eigen::Index c = 0; c < k; ++c)
                block(r, c) = m(idx[r], idx[c]);

        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(block);
        if (solver.info() != Eigen::Success)
            throw NumericalError("eigen solver failed to converge in m_F block " + std::to_string(two_mf) + "/2");

        // High-field order within a block is ascending m_J since g_J - g_I > 0.
        std::vector<Eigen::Index> by_mj(idx.begin(), idx.end());
        std::sort(by_mj.begin(), by_mj.end(),
                  [&](auto a, auto b) { return h.basis[a].two_mj < h.basis[b].two_mj; });

        for (Eigen::Index e = 0; e < k; ++e) {
            ZeemanEigenstate st;
            st.energy_hz = solver.eigenvalues()(e);
            st.two_mf = two_mf;
            st.composition = Eigen::VectorXd::Zero(n);
            for (Eigen::Index r = 0; r < k; ++r)
                st.composition(idx[r]) = solver.eigenvectors()(r, e);
            // fix the sign convention: largest component positive
            if (st.composition(static_cast<Eigen::Index>(st.dominant_component())) < 0.0)
                st.composition = -st.composition;
            st.two_mj = h.basis[by_mj[e]].two_mj;
            st.two_mi = h.basis[by_mj[e]].two_mi;
            st.mean_iz = 0.0;
            for (Eigen::Index a = 0; a < n; ++a)
                st.mean_iz += st.composition(a) * st.composition(a) * 0.5 * h.basis[a].two_mi;
            states.push_back(std::move(st));
        }
    }

    const double degeneracy_tol = 1e-9 * scale;
    std::sort(states.begin(), states.end(),
              [](const auto& a, const auto& b) { return a.energy_hz < b.energy_hz; });
    for (auto first = states.begin(); first != states.end();) {
        auto last = std::find_if(first, states.end(), [&](const auto& s) {
            return s.energy_hz - first->energy_hz > degeneracy_tol;
        });
        std::stable_sort(first, last, [](const auto& a, const auto& b) { return a.mean_iz > b.mean_iz; });
        first = last;
    }
    return states;
}

const ZeemanEigenstate& find_state(const std::vector<ZeemanEigenstate>& states, int two_mj, int two_mi)
{
    for (const auto& s : states)
        if (s.two_mj == two_mj && s.two_mi == two_mi)
            return s;
    throw ValidationError("no eigenstate with m_J=" + std::to_string(two_mj) + "/2, m_I=" +
                          std::to_string(two_mi) + "/2");
}

} // namespace vqm
