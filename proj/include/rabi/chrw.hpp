#pragma once

#include <array>

#include "rabi/model.hpp"

namespace rabi {

// Self-consistent CHRW transform parameters and the renormalized quantities
// they induce. Bessel values are kept because every downstream formula
// reuses them.
struct ChrwSolution {
    double xi = 0.0, zeta = 0.0;
    double x = 0.0, z = 0.0;
    double j0 = 1.0, j1 = 0.0, j2 = 0.0;
    double g = 0.0;  // delta*xi - epsilon*zeta
    double eps_t = 0.0, delta_t = 0.0, jc = 0.0;
    double Xi_t = 0.0;
    double u = 0.0, v = 0.0;
    double A_t = 0.0;
    double delta_det = 0.0;
    double Omega_t = 0.0;
    std::array<double, 2> residuals{};
    int iterations = 0;
    bool above_validity = false;  // A/w >= 2
};

struct ChrwPhases {
    std::array<double, 2> theta{};
    std::array<double, 2> alpha{};
    std::array<double, 2> gamma{};  // theta - alpha, unwrapped
};

// Exact A -> 0 limit used to seed continuation.
std::array<double, 2> chrw_small_amplitude_limit(const ModelParams& p);

ChrwSolution chrw_quantities(double xi, double zeta, const ModelParams& p);
std::array<double, 2> self_consistency_residuals(double xi, double zeta, const ModelParams& p);

// Damped Newton with amplitude continuation. Throws NoConvergence.
ChrwSolution solve_self_consistent(const ModelParams& p, const NumericPolicy& policy = {});

// Transformed-frame propagator in the tau (energy eigen) basis.
Mat2 analytic_propagator(const ChrwSolution& sol, const ModelParams& p, double t);
// D = u sz - v sx (Hermitian and involutory).
Mat2 diagonalizer(const ChrwSolution& sol);
// exp(-S(t)) mapping the rotating frame back to the lab frame.
Mat2 inverse_transform(const ChrwSolution& sol, const ModelParams& p, double t);
// Lab-frame CHRW approximation of U(t).
Mat2 chrw_lab_propagator(const ChrwSolution& sol, const ModelParams& p, double t);

// Cyclic state of the transformed frame, + branch, tau basis.
Vec2 chrw_cyclic_state_tau(const ChrwSolution& sol);
// Same state expressed in the lab basis at t = 0.
Vec2 chrw_cyclic_state(const ChrwSolution& sol);

ChrwPhases chrw_phases(const ChrwSolution& sol, const ModelParams& p);
// gamma_+ from the reduced formula valid at epsilon = 0.
double symmetric_aa_phase(const ChrwSolution& sol, const ModelParams& p);

// The second-order Rabi frequency formula equates a frequency to an expression
// with squared units. Both readings are exposed.
struct SecondOrderRabi {
    double frequency;   // sqrt of the printed right-hand side
    double as_printed;  // printed right-hand side
};
SecondOrderRabi rabi_frequency_2nd_order(const ModelParams& p);

// Transformed Hamiltonian H'(t) from the exact Bessel-free expression.
Mat2 transformed_hamiltonian(const ChrwSolution& sol, const ModelParams& p, double t);
// Zero-, one- and two-photon parts of H'(t) as listed in the harmonic split.
Mat2 harmonic_part(const ChrwSolution& sol, const ModelParams& p, double t, int max_harmonic);
// max over one period of ||H' - H0' - H1' - H2'|| (the neglected tail).
double harmonic_remainder_norm(const ChrwSolution& sol, const ModelParams& p, int samples = 256);

}  // namespace rabi
