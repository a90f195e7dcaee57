#include "rabi/floquet.hpp"

#include <algorithm>
#include <boost/math/tools/minima.hpp>
#include <cstdint>
#include <cmath>
#include <string>

#include "rabi/errors.hpp"
#include "rabi/geometry.hpp"

namespace rabi {

TruncatedBlockMatrix build_semiclassical_floquet(const ModelParams& p, int N) {
    if (N < 1) throw InvalidParams("Floquet truncation must be at least 1");
    const int blocks = 2 * N + 1;
    TruncatedBlockMatrix m;
    m.half_width = N;
    m.kind = MatrixKind::semiclassical_floquet;
    m.params = p;
    m.coupling = p.amplitude;
    m.entries = Eigen::MatrixXd::Zero(2 * blocks, 2 * blocks);
    for (int b = 0; b < blocks; ++b) {
        const int mm = b - N;
        const int up = 2 * b, dn = 2 * b + 1;
        m.entries(up, up) = mm * p.omega - 0.5 * p.epsilon;
        m.entries(dn, dn) = mm * p.omega + 0.5 * p.epsilon;
        m.entries(up, dn) = m.entries(dn, up) = -0.5 * p.delta;
        if (b + 1 < blocks) {
            m.entries(up, up + 2) = m.entries(up + 2, up) = -0.25 * p.amplitude;
            m.entries(dn, dn + 2) = m.entries(dn + 2, dn) = 0.25 * p.amplitude;
        }
    }
    return m;
}

TruncatedBlockMatrix build_quantum_rabi(double g, const ModelParams& p, int N) {
    if (N < 1) throw InvalidParams("Fock truncation must be at least 1");
    const int blocks = N + 1;
    TruncatedBlockMatrix m;
    m.half_width = N;
    m.kind = MatrixKind::quantum_rabi;
    m.params = p;
    m.coupling = g;
    m.entries = Eigen::MatrixXd::Zero(2 * blocks, 2 * blocks);
    for (int n = 0; n < blocks; ++n) {
        const int up = 2 * n, dn = 2 * n + 1;
        m.entries(up, up) = n * p.omega - 0.5 * p.epsilon;
        m.entries(dn, dn) = n * p.omega + 0.5 * p.epsilon;
        m.entries(up, dn) = m.entries(dn, up) = -0.5 * p.delta;
        if (n + 1 < blocks) {
            const double c = 0.25 * g * std::sqrt(n + 1.0);
            m.entries(up, up + 2) = m.entries(up + 2, up) = -c;
            m.entries(dn, dn + 2) = m.entries(dn + 2, dn) = c;
        }
    }
    return m;
}

std::vector<double> eigenvalues(const TruncatedBlockMatrix& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.entries, Eigen::EigenvaluesOnly);
    const Eigen::VectorXd& ev = es.eigenvalues();
    return {ev.data(), ev.data() + ev.size()};
}

std::array<double, 2> folded_pair(const std::vector<double>& eigs, double omega) {
    // The two eigenvalues straddling the middle of the sorted list sit in the
    // central window and always belong to different classes.
    const std::size_t mid = eigs.size() / 2;
    double a = fold_quasienergy(eigs[mid - 1], omega);
    double b = fold_quasienergy(eigs[mid], omega);
    if (a > b) std::swap(a, b);
    return {a, b};
}

SpectrumResult converged_floquet_spectrum(const ModelParams& p, double spectrum_tol, int max_n) {
    p.validate();
    SpectrumResult out;
    std::optional<std::array<double, 2>> prev;
    for (int N = 10; N <= max_n; N += 5) {
        auto eigs = eigenvalues(build_semiclassical_floquet(p, N));
        const auto pair = folded_pair(eigs, p.omega);
        out.eigenvalues = std::move(eigs);
        out.folded = pair;
        out.truncation_used = N;
        if (prev) {
            out.convergence_defect = std::max(circular_gap(pair[0], (*prev)[0], p.omega),
                                              circular_gap(pair[1], (*prev)[1], p.omega));
            if (out.convergence_defect <= spectrum_tol * p.omega) return out;
        }
        prev = pair;
    }
    throw NonConvergent("Floquet spectrum did not converge up to N = " + std::to_string(max_n));
}

SpectrumResult converged_quantum_spectrum(double g, const ModelParams& p, int levels,
                                          double spectrum_tol, int max_n) {
    p.validate();
    if (levels < 1) throw InvalidParams("need at least one level");
    SpectrumResult out;
    std::vector<double> prev;
    for (int N = 20; N <= max_n; N += 20) {
        auto eigs = eigenvalues(build_quantum_rabi(g, p, N));
        std::vector<double> low(eigs.begin(), eigs.begin() + std::min<std::size_t>(levels, eigs.size()));
        out.eigenvalues = std::move(eigs);
        out.truncation_used = N;
        if (!prev.empty()) {
            double d = 0.0;
            for (std::size_t i = 0; i < low.size(); ++i) d = std::max(d, std::abs(low[i] - prev[i]));
            out.convergence_defect = d;
            out.levels = low;
            if (d <= spectrum_tol * p.omega) return out;
        }
        prev = std::move(low);
    }
    throw NonConvergent("quantum Rabi spectrum did not converge up to N = " + std::to_string(max_n));
}

double golden_section(const std::function<double(double)>& f, double a, double b, double tol,
                      double sign) {
    // Brent's minimizer: golden-section steps with parabolic acceleration.
    const int bits = std::clamp(static_cast<int>(-std::log2(std::max(tol / std::max(std::abs(a), std::abs(b)), 1e-15))), 8, 52);
    std::uintmax_t iters = 500;
    const auto r = boost::math::tools::brent_find_minima([&](double x) { return sign * f(x); }, a, b,
                                                         bits, iters);
    return r.first;
}

std::vector<CrossingEvent> classify_crossings(const std::vector<double>& deltas,
                                              const std::function<double(double)>& gap_at,
                                              double omega, double degeneracy_tol) {
    std::vector<double> gaps(deltas.size());
    for (std::size_t i = 0; i < deltas.size(); ++i) gaps[i] = gap_at(deltas[i]);

    std::vector<CrossingEvent> events;
    for (std::size_t i = 1; i + 1 < deltas.size(); ++i) {
        if (!(gaps[i] <= gaps[i - 1] && gaps[i] < gaps[i + 1])) continue;
        // A gap closing linearly is a |.| kink; golden section handles it.
        const double at = golden_section(gap_at, deltas[i - 1], deltas[i + 1], 1e-10);
        CrossingEvent e;
        e.delta = at;
        e.min_gap = std::min(gap_at(at), gaps[i]);
        if (gap_at(at) > gaps[i]) e.delta = deltas[i];
        e.kind = e.min_gap < degeneracy_tol * omega ? CrossingKind::crossing : CrossingKind::anti_crossing;
        events.push_back(e);
    }
    return events;
}

double floquet_gap(const ModelParams& p, int N) {
    const auto pair = folded_pair(eigenvalues(build_semiclassical_floquet(p, N)), p.omega);
    return circular_gap(pair[0], pair[1], p.omega);
}

double quantum_gap(double g, const ModelParams& p, int lower, int N) {
    const auto eigs = eigenvalues(build_quantum_rabi(g, p, N));
    return eigs.at(lower + 1) - eigs.at(lower);
}

std::vector<std::array<double, 2>> track_branches(const std::vector<std::array<double, 2>>& pairs,
                                                  double omega) {
    std::vector<std::array<double, 2>> out;
    out.reserve(pairs.size());
    for (const auto& pr : pairs) {
        if (out.empty()) {
            out.push_back(pr);
            continue;
        }
        const auto& last = out.back();
        const double keep = circular_gap(pr[0], last[0], omega) + circular_gap(pr[1], last[1], omega);
        const double swap = circular_gap(pr[1], last[0], omega) + circular_gap(pr[0], last[1], omega);
        out.push_back(swap < keep ? std::array<double, 2>{pr[1], pr[0]} : pr);
    }
    return out;
}

HiddenSymmetryReport hidden_symmetry_check(const ModelParams& p, const PropagationResult& r,
                                           double degeneracy_tol, double integer_tol) {
    HiddenSymmetryReport rep;
    const double ratio = p.epsilon / p.omega;
    rep.integer_bias = std::abs(ratio - std::round(ratio)) <= integer_tol;
    const CyclicDecomposition d = cyclic_decomposition(r.final_unitary(), p);
    const double diff = std::abs(wrap_pi(d.total_phases[0] - d.total_phases[1]));
    rep.phase_gap = diff;
    rep.degenerate_phases = diff <= degeneracy_tol;
    rep.identity_distance =
        (r.final_unitary() - std::polar(1.0, d.total_phases[0]) * Mat2::Identity()).operatorNorm();
    rep.not_unique = rep.integer_bias && rep.degenerate_phases;
    return rep;
}

}  // namespace rabi
