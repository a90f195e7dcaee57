#pragma once

#include <array>

#include "rabi/chrw.hpp"

namespace rabi {

struct SingularFlags {
    bool near_omega = false;        // Omega~ ~ w
    bool near_two_omega = false;    // Omega~ ~ 2w
    bool near_three_omega = false;  // Omega~ ~ 3w
    bool any() const { return near_omega || near_two_omega || near_three_omega; }
};

struct PerturbationResult {
    double ky = 0.0, kx = 0.0, kz = 0.0, k = 0.0;
    double mu = 0.0, nu = 0.0;
    double p_coeff = 0.0, q_coeff = 0.0;
    double L = 0.0;
    double theta_pt = 0.0;
    double Omega_pt = 0.0;
    std::array<double, 2> alpha_pt{};
    std::array<double, 2> gamma_pt{};  // unwrapped, gamma_- = -gamma_+
    SingularFlags singular;
};

// Closed-form k coefficients from the two-photon part of the transformed
// Hamiltonian, plus the corrected cyclic state and phases.
PerturbationResult first_order_correction(const ChrwSolution& sol, const ModelParams& p);

// Total phase of the corrected U(T), continued from the CHRW value.
double perturbed_total_phase(const PerturbationResult& pr, const ChrwSolution& sol,
                             const ModelParams& p);
std::array<double, 2> perturbed_aa_phases(const PerturbationResult& pr, const ChrwSolution& sol,
                                          const ModelParams& p);

// Corrected + cyclic state in the tau basis (unit norm), and in the lab basis.
Vec2 perturbed_cyclic_state_tau(const PerturbationResult& pr, const ChrwSolution& sol);
Vec2 perturbed_cyclic_state(const PerturbationResult& pr, const ChrwSolution& sol);

// Squared norm of the unnormalized corrected state vector.
double perturbed_norm_squared(double k, const ChrwSolution& sol);

// i sin(Omega~ T/2)/Omega~ (delta~ tau_x - A~ tau_z); the corrected propagator
// at T is U~(T) + k times this.
Mat2 correction_direction(const ChrwSolution& sol, const ModelParams& p);
Mat2 perturbed_propagator_at_period(const PerturbationResult& pr, const ChrwSolution& sol,
                                    const ModelParams& p);

// Two-photon terms in the tau basis: index 0 -> tau_y, 1 -> tau_x, 2 -> tau_z.
std::array<Mat2, 3> second_harmonic_terms(const ChrwSolution& sol, const ModelParams& p, double t);

// Dynamical phase of the corrected state by direct quadrature over the CHRW
// trajectory, without the expansions used by the closed form.
double perturbed_dynamical_phase_quadrature(const PerturbationResult& pr, const ChrwSolution& sol,
                                            const ModelParams& p, int points = 4096);

}  // namespace rabi
