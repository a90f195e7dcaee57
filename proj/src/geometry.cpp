#include "rabi/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace rabi {
namespace {

double simpson(std::span<const double> f, double h) {
    const std::size_t n = f.size() - 1;
    double acc = f[0] + f[n];
    for (std::size_t k = 1; k < n; ++k) acc += (k % 2 ? 4.0 : 2.0) * f[k];
    return acc * h / 3.0;
}

Vec2 normalized(Vec2 v) { return v / v.norm(); }

double great_circle(const Vec3& a, const Vec3& b) {
    // atan2 form stays accurate for tiny angles where acos loses digits.
    return std::atan2(a.cross(b).norm(), a.dot(b));
}

}  // namespace

CyclicDecomposition cyclic_decomposition(const Mat2& ut, const ModelParams& p,
                                         const std::optional<Vec2>& reference_plus) {
    // U = a0 I + i (ax sx + ay sy + az sz); eigenvalues exp(+-i theta) on n.sigma = +-1.
    const double a0 = 0.5 * (ut(0, 0) + ut(1, 1)).real();
    const double az = 0.5 * (ut(0, 0) - ut(1, 1)).imag();
    const double ax = 0.5 * (ut(0, 1) + ut(1, 0)).imag();
    const double ay = 0.5 * (ut(0, 1) - ut(1, 0)).real();
    const double an = std::sqrt(ax * ax + ay * ay + az * az);

    CyclicDecomposition d;
    const double theta = std::atan2(an, a0);  // [0, pi]
    d.degenerate = 2.0 * an < kDegeneracyTol;

    if (d.degenerate) {
        d.states[0] = Vec2(1.0, 0.0);
        d.states[1] = Vec2(0.0, 1.0);
    } else {
        const double nx = ax / an, ny = ay / an, nz = az / an;
        // +1 eigenvector of n.sigma, built from whichever column is better conditioned.
        Vec2 up, dn;
        if (nz >= 0.0) {
            up = normalized(Vec2(1.0 + nz, cplx(nx, ny)));
            dn = normalized(Vec2(cplx(-nx, ny), 1.0 + nz));
        } else {
            up = normalized(Vec2(cplx(nx, -ny), 1.0 - nz));
            dn = normalized(Vec2(1.0 - nz, cplx(-nx, -ny)));
        }
        d.states[0] = up;
        d.states[1] = dn;
    }
    d.total_phases[0] = theta == kPi ? kPi : theta;
    d.total_phases[1] = wrap_pi(-theta);

    if (reference_plus && !d.degenerate) {
        const double o0 = std::abs(d.states[0].dot(*reference_plus));
        const double o1 = std::abs(d.states[1].dot(*reference_plus));
        if (o1 > o0) {
            std::swap(d.states[0], d.states[1]);
            std::swap(d.total_phases[0], d.total_phases[1]);
        }
    }
    const double period = p.period();
    for (int b = 0; b < 2; ++b)
        d.quasienergies[b] = fold_quasienergy(-d.total_phases[b] / period, p.omega);
    return d;
}

double dynamical_phase(const PropagationResult& r, const Vec2& state, const ModelParams& p) {
    std::vector<double> e(r.size());
    for (std::size_t k = 0; k < r.size(); ++k) {
        const Vec2 psi = r.unitaries[k] * state;
        e[k] = psi.dot(hamiltonian_at(r.grid[k], p) * psi).real();
    }
    return -simpson(e, r.spacing());
}

double time_energy_uncertainty(const PropagationResult& r, const Vec2& state,
                               const ModelParams& p) {
    std::vector<double> de(r.size());
    for (std::size_t k = 0; k < r.size(); ++k) {
        const Vec2 psi = r.unitaries[k] * state;
        const Mat2 h = hamiltonian_at(r.grid[k], p);
        const Vec2 hpsi = h * psi;
        const double mean = psi.dot(hpsi).real();
        // Norm of the residual, not <H^2> - <H>^2, so a stationary state gives 0.
        de[k] = (hpsi - mean * psi).norm();
    }
    return 2.0 * simpson(de, r.spacing());
}

GeometricResult aa_phases(const PropagationResult& r, const ModelParams& p,
                          const std::optional<Vec2>& reference_plus) {
    const CyclicDecomposition d = cyclic_decomposition(r.final_unitary(), p, reference_plus);
    GeometricResult g;
    g.cyclic_states = d.states;
    g.total_phases = d.total_phases;
    g.quasienergies = d.quasienergies;
    g.degenerate_flag = d.degenerate;
    for (int b = 0; b < 2; ++b) {
        g.dynamical_phases[b] = dynamical_phase(r, d.states[b], p);
        g.uncertainties[b] = time_energy_uncertainty(r, d.states[b], p);
    }
    g.uncertainty = g.uncertainties[0];
    g.aa_phases[0] = wrap_two_pi(g.total_phases[0] - g.dynamical_phases[0]);
    g.aa_phases[1] = g.aa_phases[0] == 0.0 ? 0.0 : kTwoPi - g.aa_phases[0];
    return g;
}

std::vector<PopulationSample> population_up(const PropagationResult& r, const Vec2& state) {
    std::vector<PopulationSample> out;
    out.reserve(r.size());
    for (std::size_t k = 0; k < r.size(); ++k) {
        const Vec2 psi = r.unitaries[k] * state;
        out.push_back({r.grid[k], std::clamp(std::norm(psi(0)), 0.0, 1.0)});
    }
    return out;
}

BlochTrajectory bloch_trajectory(const PropagationResult& r, const Vec2& state) {
    BlochTrajectory b;
    b.points.reserve(r.size());
    for (const auto& u : r.unitaries) b.points.push_back(bloch_vector(u * state));

    // Chord sums converge at second order; one Richardson step against the
    // every-other-point sum brings them to the quadrature level.
    double fine = 0.0, coarse = 0.0;
    for (std::size_t k = 1; k < b.points.size(); ++k)
        fine += great_circle(b.points[k - 1], b.points[k]);
    const std::size_t n = b.points.size() - 1;
    if (n % 2 == 0) {
        for (std::size_t k = 2; k <= n; k += 2) coarse += great_circle(b.points[k - 2], b.points[k]);
        b.path_length = (4.0 * fine - coarse) / 3.0;
    } else {
        b.path_length = fine;
    }
    return b;
}

std::vector<double> unwrap_phases(std::span<const double> phases) {
    std::vector<double> out(phases.begin(), phases.end());
    double shift = 0.0;
    for (std::size_t k = 1; k < out.size(); ++k) {
        const double step = phases[k] - phases[k - 1];
        shift -= kTwoPi * std::round(step / kTwoPi);
        out[k] = phases[k] + shift;
    }
    return out;
}

double ray_distance(const Vec2& a, const Vec2& b) {
    // For unit vectors in C^2, 1 - |<a|b>|^2 = |a0 b1 - a1 b0|^2 with no cancellation.
    return std::min(1.0, std::abs(a(0) * b(1) - a(1) * b(0)) / (a.norm() * b.norm()));
}

}  // namespace rabi
