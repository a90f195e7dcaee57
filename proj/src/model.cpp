#include "rabi/model.hpp"

#include <cmath>
#include <string>

#include "rabi/errors.hpp"

namespace rabi {

void ModelParams::validate() const {
    auto finite = [](double v) { return std::isfinite(v); };
    if (!finite(delta) || !finite(epsilon) || !finite(amplitude) || !finite(omega))
        throw InvalidParams("model parameters must be finite");
    if (omega <= 0.0) throw InvalidParams("omega must be positive");
    if (delta < 0.0) throw InvalidParams("delta must be non-negative");
    if (amplitude < 0.0) throw InvalidParams("amplitude must be non-negative");
    if (epsilon < 0.0) throw InvalidParams("epsilon must be non-negative");
}

void NumericPolicy::validate() const {
    if (!(step_tol > 0.0) || !(unitarity_tol > 0.0) || !(root_tol > 0.0))
        throw InvalidParams("tolerances must be positive");
    if (quad_points < 256) throw InvalidParams("quad_points must be at least 256");
    if (quad_points % 2 != 0) throw InvalidParams("quad_points must be even (Simpson rule)");
}

Mat2 pauli_x() {
    Mat2 m;
    m << 0.0, 1.0, 1.0, 0.0;
    return m;
}

Mat2 pauli_y() {
    Mat2 m;
    m << 0.0, cplx(0.0, -1.0), cplx(0.0, 1.0), 0.0;
    return m;
}

Mat2 pauli_z() {
    Mat2 m;
    m << 1.0, 0.0, 0.0, -1.0;
    return m;
}

Mat2 hamiltonian_at(double t, const ModelParams& p) {
    const double hx = -0.5 * p.delta;
    const double hz = -0.5 * (p.epsilon + p.amplitude * std::cos(p.omega * t));
    Mat2 h;
    h << hz, hx, hx, -hz;
    return h;
}

Mat2 rotated_frame_hamiltonian(double t, const ModelParams& p) {
    const double bz = -0.5 * p.delta;
    const double bx = 0.5 * (p.epsilon + p.amplitude * std::cos(p.omega * t));
    Mat2 h;
    h << bz, bx, bx, -bz;
    return h;
}

double wrap_pi(double x) {
    double r = std::remainder(x, kTwoPi);  // [-pi, pi]
    if (r <= -kPi) r += kTwoPi;
    return r;
}

double wrap_two_pi(double x) {
    double r = std::fmod(x, kTwoPi);
    if (r < 0.0) r += kTwoPi;
    if (r >= kTwoPi) r -= kTwoPi;
    return r;
}

double fold_quasienergy(double q, double omega) {
    double r = q - omega * std::floor(q / omega + 0.5);
    if (r >= 0.5 * omega) r -= omega;
    if (r < -0.5 * omega) r += omega;
    return r;
}

double circular_gap(double q1, double q2, double omega) {
    double d = std::fmod(std::abs(q1 - q2), omega);
    return std::min(d, omega - d);
}

Vec3 bloch_vector(const Vec2& psi) {
    const cplx a = psi(0), b = psi(1);
    const cplx ab = std::conj(a) * b;
    return {2.0 * ab.real(), 2.0 * ab.imag(), std::norm(a) - std::norm(b)};
}

}  // namespace rabi
