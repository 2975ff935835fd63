#include "vaporqm/transitions.hpp"

#include "vaporqm/errors.hpp"

#include <algorithm>
#include <cmath>

namespace vqm {

std::string_view to_string(Polarization p)
{
    switch (p) {
    case Polarization::pi: return "pi";
    case Polarization::sigma_plus: return "sigma+";
    case Polarization::sigma_minus: return "sigma-";
    }
    return "?";
}

int delta_m(Polarization p)
{
    switch (p) {
    case Polarization::pi: return 0;
    case Polarization::sigma_plus: return 1;
    case Polarization::sigma_minus: return -1;
    }
    return 0;
}

bool PolarizationFilter::accepts(Polarization p) const
{
    switch (p) {
    case Polarization::pi: return pi;
    case Polarization::sigma_plus: return sigma_plus;
    case Polarization::sigma_minus: return sigma_minus;
    }
    return false;
}

PolarizationFilter PolarizationFilter::only(Polarization p)
{
    PolarizationFilter f{false, false, false};
    if (p == Polarization::pi) f.pi = true;
    if (p == Polarization::sigma_plus) f.sigma_plus = true;
    if (p == Polarization::sigma_minus) f.sigma_minus = true;
    return f;
}

namespace {

double factorial(int n)
{
    return std::tgamma(static_cast<double>(n) + 1.0);
}

} // namespace

// Racah formula.
double clebsch_gordan(int two_j1, int two_m1, int two_j2, int two_m2, int two_j, int two_m)
{
    if (two_m1 + two_m2 != two_m)
        return 0.0;
    if (std::abs(two_m1) > two_j1 || std::abs(two_m2) > two_j2 || std::abs(two_m) > two_j)
        return 0.0;
    if (two_j < std::abs(two_j1 - two_j2) || two_j > two_j1 + two_j2)
        return 0.0;
    if ((two_j1 + two_j2 + two_j) % 2 != 0 || (two_j1 + two_m1) % 2 != 0 || (two_j2 + two_m2) % 2 != 0)
        return 0.0;

    const int a = (two_j1 + two_j2 - two_j) / 2;
    const int b = (two_j1 - two_j2 + two_j) / 2;
    const int c = (-two_j1 + two_j2 + two_j) / 2;
    const int d = (two_j1 + two_j2 + two_j) / 2 + 1;
    const double pre = std::sqrt((two_j + 1) * factorial(a) * factorial(b) * factorial(c) / factorial(d));
    const double norm = std::sqrt(factorial((two_j + two_m) / 2) * factorial((two_j - two_m) / 2) *
                                  factorial((two_j1 - two_m1) / 2) * factorial((two_j1 + two_m1) / 2) *
                                  factorial((two_j2 - two_m2) / 2) * factorial((two_j2 + two_m2) / 2));

    double sum = 0.0;
    for (int k = 0; k <= d; ++k) {
        const int t1 = a - k;
        const int t2 = (two_j1 - two_m1) / 2 - k;
        const int t3 = (two_j2 + two_m2) / 2 - k;
        const int t4 = (two_j - two_j2 + two_m1) / 2 + k;
        const int t5 = (two_j - two_j1 - two_m2) / 2 + k;
        if (t1 < 0 || t2 < 0 || t3 < 0 || t4 < 0 || t5 < 0)
            continue;
        const double term = 1.0 / (factorial(k) * factorial(t1) * factorial(t2) * factorial(t3) *
                                   factorial(t4) * factorial(t5));
        sum += (k % 2 == 0) ? term : -term;
    }
    return pre * norm * sum;
}

LevelStructure level_structure(const AtomSpec& atom, double field_tesla)
{
    LevelStructure ls;
    ls.field_tesla = field_tesla;
    ls.ground_hamiltonian = build_hamiltonian(atom, Manifold::ground, field_tesla);
    ls.excited_hamiltonian = build_hamiltonian(atom, Manifold::excited, field_tesla);
    ls.ground = diagonalize_manifold(ls.ground_hamiltonian);
    ls.excited = diagonalize_manifold(ls.excited_hamiltonian);
    return ls;
}

double dipole_strength(const LevelStructure& levels, const ZeemanEigenstate& lower,
                       const ZeemanEigenstate& upper, Polarization polarization)
{
    const int q2 = 2 * delta_m(polarization);
    if (upper.two_mf != lower.two_mf + q2)
        return 0.0;
    const auto& gb = levels.ground_hamiltonian.basis;
    const auto& eb = levels.excited_hamiltonian.basis;
    const int two_j = levels.ground_hamiltonian.two_j;
    const int two_jp = levels.excited_hamiltonian.two_j;

    // d_q acts on J only; m_I is a spectator.
    double amplitude = 0.0;
    for (std::size_t a = 0; a < gb.size(); ++a) {
        const double cg_lower = lower.composition(static_cast<Eigen::Index>(a));
        if (cg_lower == 0.0)
            continue;
        for (std::size_t b = 0; b < eb.size(); ++b) {
            if (eb[b].two_mi != gb[a].two_mi || eb[b].two_mj != gb[a].two_mj + q2)
                continue;
            amplitude += upper.composition(static_cast<Eigen::Index>(b)) * cg_lower *
                         clebsch_gordan(two_j, gb[a].two_mj, 2, q2, two_jp, eb[b].two_mj);
        }
    }
    return amplitude * amplitude;
}

std::vector<TransitionLine> transition_table(const LevelStructure& levels, PolarizationFilter filter,
                                             double strength_floor)
{
    std::vector<TransitionLine> lines;
    for (const auto& g : levels.ground) {
        for (const auto& e : levels.excited) {
            for (Polarization p : {Polarization::pi, Polarization::sigma_plus, Polarization::sigma_minus}) {
                if (!filter.accepts(p))
                    continue;
                const double s = dipole_strength(levels, g, e, p);
                if (s <= strength_floor)
                    continue;
                lines.push_back({e.energy_hz - g.energy_hz, s, p, g, e});
            }
        }
    }
    std::sort(lines.begin(), lines.end(),
              [](const auto& a, const auto& b) { return a.frequency_offset_hz < b.frequency_offset_hz; });
    return lines;
}

std::vector<TransitionLine> transition_table(const AtomSpec& atom, double field_tesla,
                                             PolarizationFilter filter, double strength_floor)
{
    return transition_table(level_structure(atom, field_tesla), filter, strength_floor);
}

const TransitionLine& find_line(const std::vector<TransitionLine>& lines, int lower_two_mj,
                                int lower_two_mi, int upper_two_mj, int upper_two_mi)
{
    for (const auto& l : lines) {
        if (l.lower.two_mj == lower_two_mj && l.lower.two_mi == lower_two_mi &&
            l.upper.two_mj == upper_two_mj && l.upper.two_mi == upper_two_mi)
            return l;
    }
    throw ValidationError("requested transition not present in table");
}

} // namespace vqm
