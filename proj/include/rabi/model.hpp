#pragma once

#include <Eigen/Dense>
#include <complex>
#include <numbers>

namespace rabi {

using cplx = std::complex<double>;
using Mat2 = Eigen::Matrix2cd;
using Vec2 = Eigen::Vector2cd;
using Vec3 = Eigen::Vector3d;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Physical parameters of H(t) = -(delta/2) sx - (epsilon + A cos wt)/2 sz.
struct ModelParams {
    double delta = 0.0;
    double epsilon = 0.0;
    double amplitude = 0.0;
    double omega = 1.0;

    double period() const { return kTwoPi / omega; }
    // Throws InvalidParams.
    void validate() const;
};

struct NumericPolicy {
    double step_tol = 1e-12;
    int quad_points = 4096;
    double unitarity_tol = 1e-10;
    double root_tol = 1e-12;

    void validate() const;
};

inline constexpr double kDegeneracyTol = 1e-6;
inline constexpr double kSingularTol = 1e-3;

Mat2 pauli_x();
Mat2 pauli_y();
Mat2 pauli_z();

Mat2 hamiltonian_at(double t, const ModelParams& p);
// exp(i pi sy/4) H exp(-i pi sy/4)
Mat2 rotated_frame_hamiltonian(double t, const ModelParams& p);

// (-pi, pi]
double wrap_pi(double x);
// [0, 2pi)
double wrap_two_pi(double x);
// [-w/2, w/2)
double fold_quasienergy(double q, double omega);
// Shortest distance between two quasienergies on the circle of length omega.
double circular_gap(double q1, double q2, double omega);

Vec3 bloch_vector(const Vec2& psi);

}  // namespace rabi
