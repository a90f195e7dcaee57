#include "rabi/chrw.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rabi/errors.hpp"
#include "rabi/propagator.hpp"

namespace rabi {
namespace {

double norm2(const std::array<double, 2>& r) { return std::hypot(r[0], r[1]); }

struct NewtonOutcome {
    double xi, zeta;
    std::array<double, 2> r;
    int iterations;
    bool converged;
};

NewtonOutcome newton(double xi, double zeta, const ModelParams& p, double tol, int max_iter) {
    constexpr double fd = 1e-7;
    auto r = self_consistency_residuals(xi, zeta, p);
    int it = 0;
    for (; it < max_iter; ++it) {
        const auto rx1 = self_consistency_residuals(xi + fd, zeta, p);
        const auto rx0 = self_consistency_residuals(xi - fd, zeta, p);
        const auto rz1 = self_consistency_residuals(xi, zeta + fd, p);
        const auto rz0 = self_consistency_residuals(xi, zeta - fd, p);
        Eigen::Matrix2d jac;
        jac << (rx1[0] - rx0[0]) / (2 * fd), (rz1[0] - rz0[0]) / (2 * fd),
               (rx1[1] - rx0[1]) / (2 * fd), (rz1[1] - rz0[1]) / (2 * fd);
        const Eigen::Vector2d step = jac.fullPivLu().solve(Eigen::Vector2d(-r[0], -r[1]));
        if (!step.allFinite()) break;

        double lambda = 1.0;
        double nx = xi, nz = zeta;
        auto nr = r;
        for (int k = 0; k < 30; ++k) {
            nx = xi + lambda * step(0);
            nz = zeta + lambda * step(1);
            nr = self_consistency_residuals(nx, nz, p);
            if (std::isfinite(norm2(nr)) && norm2(nr) <= (1.0 - 1e-4 * lambda) * norm2(r)) break;
            lambda *= 0.5;
        }
        const double moved = std::abs(nx - xi) + std::abs(nz - zeta);
        xi = nx;
        zeta = nz;
        // Near machine precision the line search can stall without harm.
        if (norm2(nr) >= norm2(r)) {
            r = nr;
            if (std::max(std::abs(r[0]), std::abs(r[1])) <= tol) return {xi, zeta, r, it + 1, true};
            break;
        }
        r = nr;
        if (std::max(std::abs(r[0]), std::abs(r[1])) <= tol && moved < 1e-14)
            return {xi, zeta, r, it + 1, true};
    }
    return {xi, zeta, r, it, std::max(std::abs(r[0]), std::abs(r[1])) <= tol};
}

}  // namespace

std::array<double, 2> chrw_small_amplitude_limit(const ModelParams& p) {
    const double w = p.omega;
    const double x0 = std::hypot(p.delta, p.epsilon);
    if (x0 == 0.0) return {1.0, 0.0};
    const double den = x0 * (w + x0);
    return {(w * x0 + p.epsilon * p.epsilon) / den, p.epsilon * p.delta / den};
}

ChrwSolution chrw_quantities(double xi, double zeta, const ModelParams& p) {
    ChrwSolution s;
    s.xi = xi;
    s.zeta = zeta;
    s.x = std::hypot(xi, zeta);
    s.z = p.amplitude * s.x / p.omega;
    s.j0 = std::cyl_bessel_j(0.0, s.z);
    s.j1 = std::cyl_bessel_j(1.0, s.z);
    s.j2 = std::cyl_bessel_j(2.0, s.z);
    s.g = p.delta * xi - p.epsilon * zeta;
    const double x2 = s.x * s.x;
    s.eps_t = p.epsilon + zeta / x2 * (1.0 - s.j0) * s.g;
    s.delta_t = p.delta - xi / x2 * (1.0 - s.j0) * s.g;
    s.jc = (1.0 - s.j0 - s.j2) / x2;
    s.Xi_t = std::hypot(s.delta_t, s.eps_t);
    s.u = std::sqrt(std::max(0.0, 0.5 - s.eps_t / (2.0 * s.Xi_t)));
    s.v = std::sqrt(std::max(0.0, 0.5 + s.eps_t / (2.0 * s.Xi_t)));
    s.A_t = 2.0 * s.j1 * s.g / s.x;
    s.delta_det = s.Xi_t - p.omega;
    s.Omega_t = std::hypot(s.delta_det, s.A_t);
    s.above_validity = p.amplitude / p.omega >= 2.0;
    return s;
}

std::array<double, 2> self_consistency_residuals(double xi, double zeta, const ModelParams& p) {
    const ChrwSolution s = chrw_quantities(xi, zeta, p);
    const double a = 1.0 - xi - zeta * zeta * s.jc;
    const double b = zeta * (1.0 - xi * s.jc);
    const double r1 = 0.5 * p.amplitude * (s.delta_t / s.Xi_t * a + s.eps_t / s.Xi_t * b) -
                      s.g / s.x * s.j1;
    const double r2 = s.eps_t * a - s.delta_t * b;
    return {r1, r2};
}

ChrwSolution solve_self_consistent(const ModelParams& p, const NumericPolicy& policy) {
    p.validate();
    policy.validate();
    if (std::hypot(p.delta, p.epsilon) == 0.0)
        throw DomainError("CHRW transform is undefined for delta = epsilon = 0");
    auto [xi, zeta] = chrw_small_amplitude_limit(p);
    int total = 0;
    if (p.amplitude > 0.0) {
        const int steps = std::max(4, static_cast<int>(std::ceil(p.amplitude / (0.1 * p.omega))));
        ModelParams q = p;
        NewtonOutcome out{};
        for (int k = 1; k <= steps; ++k) {
            q.amplitude = p.amplitude * k / steps;
            const double tol = k == steps ? policy.root_tol : 1e-9;
            out = newton(xi, zeta, q, tol, 60);
            total += out.iterations;
            if (!out.converged) {
                NoConvergence e("CHRW self-consistency failed at A = " +
                                std::to_string(q.amplitude));
                e.residual_xi = out.r[0];
                e.residual_zeta = out.r[1];
                throw e;
            }
            xi = out.xi;
            zeta = out.zeta;
        }
    }
    ChrwSolution s = chrw_quantities(xi, zeta, p);
    s.residuals = self_consistency_residuals(xi, zeta, p);
    s.iterations = total;
    return s;
}

Mat2 analytic_propagator(const ChrwSolution& s, const ModelParams& p, double t) {
    const double half = 0.5 * s.Omega_t * t;
    const double c = std::cos(half);
    const double sn = s.Omega_t > 0.0 ? std::sin(half) / s.Omega_t : 0.5 * t;
    const cplx em = std::polar(1.0, -0.5 * p.omega * t);
    const cplx ep = std::conj(em);
    const cplx i(0.0, 1.0);
    Mat2 u;
    u << em * (c - i * s.delta_det * sn), -em * i * s.A_t * sn,
         -ep * i * s.A_t * sn, ep * (c + i * s.delta_det * sn);
    return u;
}

Mat2 diagonalizer(const ChrwSolution& s) { return s.u * pauli_z() - s.v * pauli_x(); }

Mat2 inverse_transform(const ChrwSolution& s, const ModelParams& p, double t) {
    const double c = -0.5 * p.amplitude / p.omega * std::sin(p.omega * t);
    return su2_exp(Vec3(c * s.zeta, 0.0, c * s.xi), 1.0);
}

Mat2 chrw_lab_propagator(const ChrwSolution& s, const ModelParams& p, double t) {
    const Mat2 d = diagonalizer(s);
    return inverse_transform(s, p, t) * d * analytic_propagator(s, p, t) * d;
}

Vec2 chrw_cyclic_state_tau(const ChrwSolution& s) {
    // Eigenvector of U~(T) with phase +(Omega - w)T/2.
    if (s.Omega_t == 0.0 || s.Omega_t - s.delta_det <= 0.0) return Vec2(0.0, 1.0);
    const double scale = std::sqrt(2.0 * s.Omega_t / (s.Omega_t - s.delta_det));
    Vec2 v(scale * (0.5 - s.delta_det / (2.0 * s.Omega_t)), -scale * s.A_t / (2.0 * s.Omega_t));
    return v / v.norm();
}

Vec2 chrw_cyclic_state(const ChrwSolution& s) { return diagonalizer(s) * chrw_cyclic_state_tau(s); }

ChrwPhases chrw_phases(const ChrwSolution& s, const ModelParams& p) {
    const double T = p.period();
    const double eps = p.epsilon, del = p.delta, A = p.amplitude;
    const double x2 = s.x * s.x;
    const double dx = s.delta_t / s.Xi_t, ex = s.eps_t / s.Xi_t;
    const double dd = s.delta_det, At = s.A_t;
    const double j1z = s.z > 0.0 ? s.j1 / s.z : 0.5;

    const double b1 = eps * (ex * dd * (1.0 + s.j0) + 2.0 * s.xi * s.zeta / x2 * dx * dd * (1.0 - s.j0) -
                             2.0 * s.zeta / s.x * At * s.j1 +
                             (s.xi * s.xi - s.zeta * s.zeta) / x2 * ex * dd * (1.0 - s.j0));
    const double b2 = A * At * (s.xi * s.xi / x2 * dx + s.xi * s.zeta / x2 * ex * (2.0 * j1z - 1.0) +
                                2.0 * s.zeta * s.zeta / x2 * dx * j1z);
    const double b3 = 2.0 * del * (s.zeta * s.zeta / x2 * dx * dd + s.xi * s.xi / x2 * dx * s.j0 * dd +
                                   s.xi * s.zeta / x2 * ex * dd * (1.0 - s.j0) + s.xi / s.x * At * s.j1);

    ChrwPhases ph;
    ph.theta[0] = 0.5 * (s.Omega_t - p.omega) * T;
    ph.theta[1] = -ph.theta[0];
    ph.alpha[0] = T / (4.0 * s.Omega_t) * (b1 + b2 + b3);
    ph.alpha[1] = -ph.alpha[0];
    for (int b = 0; b < 2; ++b) ph.gamma[b] = ph.theta[b] - ph.alpha[b];
    return ph;
}

double symmetric_aa_phase(const ChrwSolution& s, const ModelParams& p) {
    const double T = p.period();
    const double At = s.A_t, dd = s.delta_det;
    const double tail = At != 0.0 ? s.delta_t * dd / At : 0.0;
    return 0.5 * (s.Omega_t - p.omega) * T -
           At * T / (2.0 * s.Omega_t) * (tail + 0.5 * p.amplitude + 0.5 * At);
}

SecondOrderRabi rabi_frequency_2nd_order(const ModelParams& p) {
    const double x0 = std::hypot(p.delta, p.epsilon);
    if (x0 == 0.0) throw DomainError("second-order Rabi frequency needs a nonzero bare splitting");
    const double w = p.omega;
    const double rhs = (w - x0) * (w - x0) +
                       p.amplitude * p.amplitude * p.delta * p.delta / (2.0 * x0 * (w + x0));
    return {std::sqrt(rhs), rhs};
}

Mat2 transformed_hamiltonian(const ChrwSolution& s, const ModelParams& p, double t) {
    const double theta = s.z * std::sin(p.omega * t);
    const double x2 = s.x * s.x;
    const double c = (1.0 - std::cos(theta)) / x2;
    const double sn = std::sin(theta) / s.x;
    const double et = p.epsilon + p.amplitude * std::cos(p.omega * t);
    const Mat2 sx = pauli_x(), sy = pauli_y(), sz = pauli_z();
    const Mat2 mix = s.xi * sx - s.zeta * sz;
    return -0.5 * p.delta * (sx - c * s.xi * mix + sn * s.xi * sy) -
           0.5 * et * (sz + c * s.zeta * mix - sn * s.zeta * sy) +
           0.5 * p.amplitude * (s.xi * sz + s.zeta * sx) * std::cos(p.omega * t);
}

Mat2 harmonic_part(const ChrwSolution& s, const ModelParams& p, double t, int max_harmonic) {
    const Mat2 sx = pauli_x(), sy = pauli_y(), sz = pauli_z();
    const double wt = p.omega * t;
    Mat2 h = -0.5 * s.delta_t * sx - 0.5 * s.eps_t * sz;
    if (max_harmonic >= 1) {
        h += -s.g / s.x * s.j1 * std::sin(wt) * sy -
             0.5 * p.amplitude * (1.0 - s.xi - s.zeta * s.zeta * s.jc) * std::cos(wt) * sz +
             0.5 * p.amplitude * s.zeta * (1.0 - s.xi * s.jc) * std::cos(wt) * sx;
    }
    if (max_harmonic >= 2) {
        h += 0.5 * p.amplitude * s.zeta / s.x * s.j1 * std::sin(2.0 * wt) * sy -
             s.g / (s.x * s.x) * s.j2 * std::cos(2.0 * wt) * (s.xi * sx - s.zeta * sz);
    }
    return h;
}

double harmonic_remainder_norm(const ChrwSolution& s, const ModelParams& p, int samples) {
    double worst = 0.0;
    const double T = p.period();
    for (int k = 0; k < samples; ++k) {
        const double t = T * k / samples;
        const Mat2 r = transformed_hamiltonian(s, p, t) - harmonic_part(s, p, t, 2);
        worst = std::max(worst, r.operatorNorm());
    }
    return worst;
}

}  // namespace rabi
