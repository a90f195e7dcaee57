#pragma once

#include <array>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "rabi/propagator.hpp"

namespace rabi {

// Index 0 is the + branch, index 1 the - branch.
struct CyclicDecomposition {
    std::array<Vec2, 2> states;
    std::array<double, 2> total_phases{};   // (-pi, pi]
    std::array<double, 2> quasienergies{};  // [-w/2, w/2)
    bool degenerate = false;
};

struct GeometricResult {
    std::array<Vec2, 2> cyclic_states;
    std::array<double, 2> total_phases{};
    std::array<double, 2> dynamical_phases{};
    std::array<double, 2> aa_phases{};  // [0, 2pi), gamma_- = 2pi - gamma_+
    std::array<double, 2> quasienergies{};
    double uncertainty = 0.0;
    std::array<double, 2> uncertainties{};
    bool degenerate_flag = false;

    // theta_+ - alpha_+ before mapping into [0, 2pi).
    double raw_aa_phase_plus() const { return total_phases[0] - dynamical_phases[0]; }
};

struct BlochTrajectory {
    std::vector<Vec3> points;
    double path_length = 0.0;
};

struct PopulationSample {
    double time;
    double p_up;
};

// Branch + is theta in [0, pi] unless a reference state is given, in which
// case + is the eigenvector with the larger overlap.
CyclicDecomposition cyclic_decomposition(const Mat2& ut, const ModelParams& p,
                                         const std::optional<Vec2>& reference_plus = {});

double dynamical_phase(const PropagationResult& r, const Vec2& state, const ModelParams& p);
double time_energy_uncertainty(const PropagationResult& r, const Vec2& state,
                               const ModelParams& p);

GeometricResult aa_phases(const PropagationResult& r, const ModelParams& p,
                          const std::optional<Vec2>& reference_plus = {});

std::vector<PopulationSample> population_up(const PropagationResult& r, const Vec2& state);

BlochTrajectory bloch_trajectory(const PropagationResult& r, const Vec2& state);

// Removes 2pi jumps between consecutive samples.
std::vector<double> unwrap_phases(std::span<const double> phases);

// Global-phase-free distance between rays, in [0, 1].
double ray_distance(const Vec2& a, const Vec2& b);

}  // namespace rabi
