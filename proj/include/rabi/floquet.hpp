#pragma once

#include <array>
#include <functional>
#include <optional>
#include <vector>

#include "rabi/propagator.hpp"

namespace rabi {

enum class MatrixKind { semiclassical_floquet, quantum_rabi };

struct TruncatedBlockMatrix {
    int half_width = 0;
    Eigen::MatrixXd entries;
    MatrixKind kind = MatrixKind::semiclassical_floquet;
    ModelParams params;
    double coupling = 0.0;  // A for Floquet, g for the quantum model
};

// Basis order per block: (up, down). Floquet blocks run m = -N..N.
TruncatedBlockMatrix build_semiclassical_floquet(const ModelParams& p, int N);
// Fock blocks run n = 0..N.
TruncatedBlockMatrix build_quantum_rabi(double g, const ModelParams& p, int N);

std::vector<double> eigenvalues(const TruncatedBlockMatrix& m);

struct SpectrumResult {
    std::vector<double> eigenvalues;                    // at truncation_used, sorted
    std::optional<std::array<double, 2>> folded;         // Floquet only, ascending
    std::vector<double> levels;                          // quantum only, lowest M
    int truncation_used = 0;
    double convergence_defect = 0.0;
};

// Floquet schedule N = 10, 15, 20, ... until the folded pair moves by less
// than spectrum_tol. Throws NonConvergent.
SpectrumResult converged_floquet_spectrum(const ModelParams& p, double spectrum_tol = 1e-8,
                                          int max_n = 80);
// Quantum schedule N = 20, 40, 60, ... on the lowest `levels` eigenvalues.
SpectrumResult converged_quantum_spectrum(double g, const ModelParams& p, int levels,
                                          double spectrum_tol = 1e-8, int max_n = 200);

// Fold and pair quasienergies drawn from the central window.
std::array<double, 2> folded_pair(const std::vector<double>& sorted_eigs, double omega);

enum class CrossingKind { crossing, anti_crossing };

struct CrossingEvent {
    double delta = 0.0;
    CrossingKind kind = CrossingKind::anti_crossing;
    double min_gap = 0.0;
};

// Scans `gap_at` on the grid, refines each interior local minimum by golden
// section and labels it against degeneracy_tol * omega.
std::vector<CrossingEvent> classify_crossings(const std::vector<double>& deltas,
                                              const std::function<double(double)>& gap_at,
                                              double omega, double degeneracy_tol = kDegeneracyTol);

// Circular gap of the two Floquet quasienergies at a given delta.
double floquet_gap(const ModelParams& p, int N = 30);
// Gap between sorted quantum levels `lower` and `lower + 1`.
double quantum_gap(double g, const ModelParams& p, int lower, int N = 40);

// Orders successive folded pairs so each branch moves continuously on the
// quasienergy circle.
std::vector<std::array<double, 2>> track_branches(const std::vector<std::array<double, 2>>& pairs,
                                                  double omega);

struct HiddenSymmetryReport {
    bool integer_bias = false;
    bool degenerate_phases = false;
    double phase_gap = 0.0;           // |theta_+ - theta_-| mod 2pi, circular
    double identity_distance = 0.0;   // ||U(T) - exp(i theta_+) I||
    bool not_unique = false;          // both of the above hold
};

HiddenSymmetryReport hidden_symmetry_check(const ModelParams& p, const PropagationResult& r,
                                           double degeneracy_tol = kDegeneracyTol,
                                           double integer_tol = 1e-9);

// Minimum (or maximum, with sign = -1) of f in [a, b] to roughly tol.
double golden_section(const std::function<double(double)>& f, double a, double b, double tol,
                      double sign = 1.0);

}  // namespace rabi
