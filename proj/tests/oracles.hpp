#pragma once

// Independent reference implementations used only by the tests.

#include <Eigen/Eigenvalues>
#include <array>
#include <cmath>
#include <random>

#include "rabi/chrw.hpp"
#include "rabi/model.hpp"
#include "rabi/perturbation.hpp"

namespace oracle {

using rabi::cplx;
using rabi::Mat2;
using rabi::ModelParams;
using rabi::Vec2;

// J_n(z) from its power series; fine for z <= 10 in long double.
inline double bessel_series(int n, double z) {
    long double term = 1.0L;
    for (int k = 1; k <= n; ++k) term *= (0.5L * z) / k;
    long double sum = term;
    const long double q = -0.25L * z * z;
    for (int m = 1; m < 200; ++m) {
        term *= q / (static_cast<long double>(m) * (m + n));
        sum += term;
        if (std::abs(term) < 1e-30L * std::abs(sum)) break;
    }
    return static_cast<double>(sum);
}

// Classical RK4 on i dU/dt = H U; unrelated to the Magnus scheme under test.
inline Mat2 rk4_propagator(const ModelParams& p, double t_end, int steps) {
    const cplx mi(0.0, -1.0);
    auto f = [&](double t, const Mat2& u) -> Mat2 { return mi * rabi::hamiltonian_at(t, p) * u; };
    Mat2 u = Mat2::Identity();
    const double h = t_end / steps;
    for (int k = 0; k < steps; ++k) {
        const double t = k * h;
        const Mat2 k1 = f(t, u);
        const Mat2 k2 = f(t + 0.5 * h, u + 0.5 * h * k1);
        const Mat2 k3 = f(t + 0.5 * h, u + 0.5 * h * k2);
        const Mat2 k4 = f(t + h, u + h * k3);
        u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return u;
}

// Eigenpairs of U(T) from a general complex eigensolver.
struct Eig {
    std::array<Vec2, 2> vecs;
    std::array<double, 2> phases;
};
inline Eig eigen_unitary(const Mat2& u) {
    Eigen::ComplexEigenSolver<Mat2> es(u);
    Eig e;
    for (int i = 0; i < 2; ++i) {
        e.vecs[i] = es.eigenvectors().col(i).normalized();
        e.phases[i] = std::arg(es.eigenvalues()(i));
    }
    return e;
}

// Closed-form k coefficient obtained by integrating U~^-1 H~2 U~ over one
// period and projecting onto the correction direction.
inline std::array<double, 3> k_by_quadrature(const rabi::ChrwSolution& s, const ModelParams& p,
                                             int points = 8192) {
    const double T = p.period();
    const double h = T / points;
    std::array<Mat2, 3> acc;
    for (auto& a : acc) a.setZero();
    for (int n = 0; n <= points; ++n) {
        const double t = n * h;
        const double w = (n == 0 || n == points) ? 1.0 : (n % 2 ? 4.0 : 2.0);
        const Mat2 u = rabi::analytic_propagator(s, p, t);
        const Mat2 ui = u.adjoint();
        const auto terms = rabi::second_harmonic_terms(s, p, t);
        for (int i = 0; i < 3; ++i) acc[i] += w * (ui * terms[i] * u);
    }
    const Mat2 ut = rabi::analytic_propagator(s, p, T);
    const Mat2 b = rabi::correction_direction(s, p);
    std::array<double, 3> k{};
    for (int i = 0; i < 3; ++i) {
        const Mat2 m = cplx(0.0, -1.0) * ut * (acc[i] * (h / 3.0));
        k[i] = ((b.adjoint() * m).trace() / (b.adjoint() * b).trace()).real();
    }
    return k;
}

// Euclidean distance between two eigen-sets of quasienergies on the circle.
inline double set_distance(std::array<double, 2> a, std::array<double, 2> b, double omega) {
    auto g = [omega](double x, double y) { return rabi::circular_gap(x, y, omega); };
    return std::min(std::max(g(a[0], b[0]), g(a[1], b[1])), std::max(g(a[0], b[1]), g(a[1], b[0])));
}

inline std::mt19937_64 rng(std::uint64_t seed = 20261016) { return std::mt19937_64(seed); }

}  // namespace oracle
