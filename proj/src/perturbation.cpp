#include "rabi/perturbation.hpp"

#include <cmath>
#include <vector>

namespace rabi {

double perturbed_norm_squared(double k, const ChrwSolution& s) {
    const double r = std::sqrt(1.0 + k * k);
    return 2.0 * (1.0 + k * k) * s.Omega_t * s.Omega_t +
           2.0 * (s.delta_det - k * s.A_t) * r * s.Omega_t;
}

PerturbationResult first_order_correction(const ChrwSolution& s, const ModelParams& p) {
    const double w = p.omega, A = p.amplitude;
    const double om = s.Omega_t, dd = s.delta_det, At = s.A_t;
    const double x2 = s.x * s.x;
    const double u = s.u, v = s.v;

    PerturbationResult pr;
    pr.mu = s.xi * u - s.zeta * v;
    pr.nu = s.xi * v + s.zeta * u;
    pr.p_coeff = (v * v - u * u) * s.zeta - 2.0 * s.xi * u * v;
    pr.q_coeff = (v * v - u * u) * s.xi + 2.0 * u * v * s.zeta;

    // (Omega^2 - w^2)(Omega^2 - 9w^2)
    const double den13 = 9.0 * w * w * w * w - 10.0 * w * w * om * om + om * om * om * om;
    const double den2 = om * om - 4.0 * w * w;
    pr.ky = 2.0 * A * s.zeta * w * s.j1 * (3.0 * w * w + 2.0 * dd * w - om * om) / (s.x * den13);
    pr.kx = 2.0 * s.g * s.j2 / x2 * pr.q_coeff *
            (3.0 * w * w * w + 5.0 * w * w * dd + w * om * om - dd * om * om) / den13;
    pr.kz = -2.0 * s.g * s.j2 / x2 * At * (2.0 * s.xi * u * v + s.zeta * (u * u - v * v)) / den2;
    pr.k = pr.ky + pr.kx + pr.kz;

    pr.singular.near_omega = std::abs(om - w) < kSingularTol * w;
    pr.singular.near_two_omega = std::abs(om - 2.0 * w) < kSingularTol * w;
    pr.singular.near_three_omega = std::abs(om - 3.0 * w) < kSingularTol * w;

    pr.L = std::sqrt(perturbed_norm_squared(pr.k, s));
    pr.theta_pt = perturbed_total_phase(pr, s, p);
    const double r = std::sqrt(1.0 + pr.k * pr.k);
    pr.Omega_pt = r * (om - 2.0 * w) + 2.0 * w;
    pr.gamma_pt = perturbed_aa_phases(pr, s, p);
    const double theta = 0.5 * (om - w) * p.period();
    pr.alpha_pt = {theta - pr.gamma_pt[0], -(theta - pr.gamma_pt[0])};
    return pr;
}

double perturbed_total_phase(const PerturbationResult& pr, const ChrwSolution& s,
                             const ModelParams& p) {
    const double half = 0.5 * s.Omega_t * p.period();
    const double r = std::sqrt(1.0 + pr.k * pr.k);
    const double lambda_arg = std::arg(cplx(-std::cos(half), -r * std::sin(half)));
    const double theta = 0.5 * (s.Omega_t - p.omega) * p.period();
    return theta + wrap_pi(lambda_arg - theta);
}

std::array<double, 2> perturbed_aa_phases(const PerturbationResult& pr, const ChrwSolution& s,
                                          const ModelParams& p) {
    const double w = p.omega, A = p.amplitude, eps = p.epsilon, del = p.delta;
    const double om = s.Omega_t, dd = s.delta_det, At = s.A_t;
    const double u = s.u, v = s.v, z = s.z;
    const double k = pr.k, r = std::sqrt(1.0 + k * k);
    const double mu = pr.mu, nu = pr.nu;
    const double L2 = pr.L * pr.L;
    const double j1z = z > 0.0 ? 2.0 * s.j1 / z : 1.0;

    const double inner =
        A * A * dd / (2.0 * w * w * w) * (eps * (nu * nu - mu * mu) - 2.0 * del * mu * nu) -
        dd / (128.0 * w) * (3.0 * z * z * z * z - 64.0 * z * z + 512.0) *
            (u * u * eps - 2.0 * u * v * del - v * v * eps) -
        2.0 * A * At / (w * w) * ((u * eps - v * del) * nu - (u * del + v * eps) * mu) +
        A * At / w * (j1z + 1.0) * (k * (u * u - v * v) + 2.0 * u * v);
    const double second = 4.0 * k / (s.x * s.x) * s.j2 * (u * nu - v * mu) *
                          (k * At * (om + dd) - (1.0 + r) * om * dd - r * om * om - dd * dd);
    const double alpha = kPi / (2.0 * L2) * ((dd + r * om - k * At) * inner + second);
    const double theta = 0.5 * (om - w) * p.period();
    return {theta - alpha, -(theta - alpha)};
}

Vec2 perturbed_cyclic_state_tau(const PerturbationResult& pr, const ChrwSolution& s) {
    const double r = std::sqrt(1.0 + pr.k * pr.k);
    Vec2 v(s.A_t + pr.k * s.delta_det, pr.k * s.A_t - s.delta_det - r * s.Omega_t);
    return v / pr.L;
}

Vec2 perturbed_cyclic_state(const PerturbationResult& pr, const ChrwSolution& s) {
    return diagonalizer(s) * perturbed_cyclic_state_tau(pr, s);
}

Mat2 correction_direction(const ChrwSolution& s, const ModelParams& p) {
    const double sn = std::sin(0.5 * s.Omega_t * p.period()) / s.Omega_t;
    return cplx(0.0, sn) * (s.delta_det * pauli_x() - s.A_t * pauli_z());
}

Mat2 perturbed_propagator_at_period(const PerturbationResult& pr, const ChrwSolution& s,
                                    const ModelParams& p) {
    return analytic_propagator(s, p, p.period()) + pr.k * correction_direction(s, p);
}

std::array<Mat2, 3> second_harmonic_terms(const ChrwSolution& s, const ModelParams& p, double t) {
    const double u = s.u, v = s.v;
    const double pc = (v * v - u * u) * s.zeta - 2.0 * s.xi * u * v;
    const double qc = (v * v - u * u) * s.xi + 2.0 * u * v * s.zeta;
    const double c2 = std::cos(2.0 * p.omega * t);
    const double pre = (p.epsilon * s.zeta - p.delta * s.xi) / (s.x * s.x) * s.j2;
    return {Mat2(-p.amplitude * s.zeta / (2.0 * s.x) * s.j1 * std::sin(2.0 * p.omega * t) * pauli_y()),
            Mat2(pre * qc * c2 * pauli_x()), Mat2(pre * pc * c2 * pauli_z())};
}

double perturbed_dynamical_phase_quadrature(const PerturbationResult& pr, const ChrwSolution& s,
                                            const ModelParams& p, int points) {
    if (points % 2) ++points;
    const Vec2 phi = perturbed_cyclic_state_tau(pr, s);
    const Mat2 d = diagonalizer(s);
    const double h = p.period() / points;
    double acc = 0.0;
    for (int n = 0; n <= points; ++n) {
        const double t = n * h;
        const Vec2 psi = inverse_transform(s, p, t) * d * analytic_propagator(s, p, t) * phi;
        const double e = psi.dot(hamiltonian_at(t, p) * psi).real() / psi.squaredNorm();
        acc += (n == 0 || n == points ? 1.0 : (n % 2 ? 4.0 : 2.0)) * e;
    }
    return -acc * h / 3.0;
}

}  // namespace rabi
