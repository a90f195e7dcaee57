#include <doctest.h>

#include "oracles.hpp"
#include "rabi/chrw.hpp"
#include "rabi/geometry.hpp"
#include "rabi/propagator.hpp"

using namespace rabi;

namespace {

int count_local_maxima(const std::vector<PopulationSample>& s) {
    int n = 0;
    for (std::size_t i = 1; i + 1 < s.size(); ++i)
        if (s[i].p_up > s[i - 1].p_up && s[i].p_up >= s[i + 1].p_up) ++n;
    return n;
}

}  // namespace

TEST_CASE("static symmetric case: cyclic states and phases") {
    const ModelParams p{1.0, 0.0, 0.0, 1.0};
    const auto r = propagate(p);
    const auto d = cyclic_decomposition(r.final_unitary(), p);
    // U(T) = cos(pi) I + i sin(pi) sx = -I up to roundoff -> flagged as degenerate.
    CHECK(d.degenerate);
    const ModelParams q{0.7, 0.0, 0.0, 1.0};
    const auto rq = propagate(q);
    const auto dq = cyclic_decomposition(rq.final_unitary(), q);
    CHECK_FALSE(dq.degenerate);
    const double th = 0.5 * q.delta * q.period();
    // + branch is theta in [0, pi]: e^{i th} belongs to the +1 eigenvector of sx.
    CHECK(dq.total_phases[0] == doctest::Approx(wrap_pi(th)).epsilon(1e-12));
    CHECK(dq.total_phases[1] == doctest::Approx(wrap_pi(-th)).epsilon(1e-12));
    CHECK(ray_distance(dq.states[0], Vec2(1, 1) / std::sqrt(2.0)) < 1e-10);
    CHECK(ray_distance(dq.states[1], Vec2(1, -1) / std::sqrt(2.0)) < 1e-10);
}

TEST_CASE("identity is degenerate with the canonical sz pair") {
    const ModelParams p{0.0, 0.0, 0.0, 1.0};
    const auto d = cyclic_decomposition(Mat2::Identity(), p);
    CHECK(d.degenerate);
    CHECK(d.total_phases[0] == 0.0);
    CHECK(d.total_phases[1] == 0.0);
    CHECK(ray_distance(d.states[0], Vec2(1, 0)) == 0.0);
    CHECK(ray_distance(d.states[1], Vec2(0, 1)) == 0.0);
}

TEST_CASE("cyclic decomposition agrees with a general eigensolver") {
    auto gen = oracle::rng(21);
    std::uniform_real_distribution<double> u(0.0, 3.0), a(0.0, 2.0);
    for (int i = 0; i < 30; ++i) {
        const ModelParams p{u(gen), u(gen), a(gen), 1.0};
        const auto r = propagate(p);
        const auto d = cyclic_decomposition(r.final_unitary(), p);
        if (d.degenerate) continue;
        const auto e = oracle::eigen_unitary(r.final_unitary());
        for (int b = 0; b < 2; ++b) {
            const int j = ray_distance(d.states[b], e.vecs[0]) < ray_distance(d.states[b], e.vecs[1]) ? 0 : 1;
            CHECK(ray_distance(d.states[b], e.vecs[j]) < 1e-9);
            CHECK(std::abs(wrap_pi(d.total_phases[b] - e.phases[j])) < 1e-9);
            const Vec2 img = r.final_unitary() * d.states[b];
            CHECK((img - std::polar(1.0, d.total_phases[b]) * d.states[b]).norm() < 1e-12);
        }
        CHECK(d.total_phases[0] >= 0.0);
    }
}

TEST_CASE("dynamical phase of stationary states") {
    const ModelParams p{1.0, 0.0, 0.0, 1.0};
    const auto r = propagate(p);
    CHECK(dynamical_phase(r, Vec2(1, -1) / std::sqrt(2.0), p) == doctest::Approx(-0.5 * p.delta * p.period()).epsilon(1e-12));
    // The (1,-1) state has <H> = +delta/2 for H = -(delta/2) sx.
    CHECK(dynamical_phase(r, Vec2(1, 1) / std::sqrt(2.0), p) == doctest::Approx(0.5 * p.delta * p.period()).epsilon(1e-12));
    const ModelParams q{0.0, 0.5, 0.0, 1.0};
    const auto rq = propagate(q);
    CHECK(dynamical_phase(rq, Vec2(1, 0), q) == doctest::Approx(0.5 * q.epsilon * q.period()).epsilon(1e-12));
    CHECK(time_energy_uncertainty(r, Vec2(1, 1) / std::sqrt(2.0), p) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("resonant point: cyclicity, antisymmetry, 6 pi path") {
    const ModelParams p{2.7993, 0.8, 1.0, 1.0};
    const auto r = propagate(p);
    const auto g = aa_phases(r, p);
    CHECK(std::abs(g.dynamical_phases[0] + g.dynamical_phases[1]) < 1e-8);
    CHECK(std::abs(g.uncertainties[0] - g.uncertainties[1]) < 1e-8);
    CHECK(g.uncertainty / kPi == doctest::Approx(6.0).epsilon(0.01));
    const auto b = bloch_trajectory(r, g.cyclic_states[0]);
    CHECK(std::abs(b.path_length - g.uncertainty) < 1e-6);
    CHECK((b.points.front() - b.points.back()).norm() < 1e-8);
    for (const auto& pt : b.points) CHECK(std::abs(pt.norm() - 1.0) < 1e-12);
    const auto pu = population_up(r, g.cyclic_states[0]);
    CHECK(std::abs(pu.front().p_up - pu.back().p_up) < 1e-8);
    CHECK(count_local_maxima(pu) >= 2);
}

TEST_CASE("off-resonant cyclic state: slow population variation") {
    const ModelParams p{2.7, 0.8, 1.0, 1.0};
    const auto r = propagate(p);
    const auto g = aa_phases(r, p);
    CHECK(g.uncertainty < 2 * kPi);
    const auto pu = population_up(r, g.cyclic_states[0]);
    for (const auto& s : pu) CHECK((s.p_up >= 0.0 && s.p_up <= 1.0));
    CHECK(std::abs(pu.front().p_up - pu.back().p_up) < 1e-8);
}

TEST_CASE("zero tunneling: frozen trajectory and trivial AA phase") {
    const ModelParams p{0.0, 0.5, 1.0, 1.0};
    const auto r = propagate(p);
    const auto g = aa_phases(r, p);
    for (int b = 0; b < 2; ++b) {
        const double gm = std::min(g.aa_phases[b], kTwoPi - g.aa_phases[b]);
        CHECK(gm < 1e-9);
    }
    const auto b = bloch_trajectory(r, Vec2(1, 0));
    CHECK(b.path_length < 1e-12);
    for (const auto& s : population_up(r, Vec2(1, 0))) CHECK(s.p_up == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("geometry invariants on random parameters") {
    auto gen = oracle::rng(22);
    std::uniform_real_distribution<double> u(0.0, 3.0), a(0.0, 2.0);
    for (int i = 0; i < 25; ++i) {
        const ModelParams p{u(gen), u(gen), a(gen), 1.0};
        const auto r = propagate(p);
        const auto g = aa_phases(r, p);
        CHECK(std::abs(wrap_pi(g.total_phases[0] + g.total_phases[1])) <= 1e-8);
        CHECK(std::abs(g.dynamical_phases[0] + g.dynamical_phases[1]) <= 1e-8);
        CHECK(std::abs(wrap_pi(g.aa_phases[0] + g.aa_phases[1])) <= 1e-6);
        CHECK((g.aa_phases[0] >= 0.0 && g.aa_phases[0] < kTwoPi));
        if (!g.degenerate_flag) {
            CHECK(std::abs(g.cyclic_states[0].dot(g.cyclic_states[1])) <= 1e-8);
            CHECK(g.aa_phases[0] + g.aa_phases[1] == doctest::Approx(kTwoPi));
        }
        for (int b = 0; b < 2; ++b) {
            CHECK(std::abs(g.uncertainties[b] - bloch_trajectory(r, g.cyclic_states[b]).path_length) <= 1e-6);
            CHECK((g.quasienergies[b] >= -0.5 && g.quasienergies[b] < 0.5));
        }
        CHECK(std::abs(g.uncertainties[0] - g.uncertainties[1]) <= 1e-8);
    }
}

TEST_CASE("labels follow a supplied reference state") {
    const ModelParams p{2.0, 0.5, 1.0, 1.0};
    const auto r = propagate(p);
    const auto plain = cyclic_decomposition(r.final_unitary(), p);
    const auto swapped = cyclic_decomposition(r.final_unitary(), p, plain.states[1]);
    CHECK(ray_distance(swapped.states[0], plain.states[1]) < 1e-14);
    CHECK(swapped.total_phases[0] == plain.total_phases[1]);
}

TEST_CASE("AA phase near the main resonance passes through pi") {
    // ε = 0, A = 1: scan Δ around the main resonance; the γ curve crosses π.
    const ModelParams base{0.0, 0.0, 1.0, 1.0};
    bool below = false, above = false;
    for (double d = 0.6; d <= 1.3; d += 0.02) {
        ModelParams p = base;
        p.delta = d;
        const auto g = aa_phases(propagate(p), p);
        if (g.aa_phases[0] < kPi) below = true;
        if (g.aa_phases[0] > kPi) above = true;
    }
    CHECK(below);
    CHECK(above);
}

TEST_CASE("off-resonance exact AA phase is within a few percent of CHRW") {
    const ModelParams p{2.0, 0.5, 1.0, 1.0};
    const auto sol = solve_self_consistent(p);
    const auto ph = chrw_phases(sol, p);
    const auto g = aa_phases(propagate(p), p, chrw_cyclic_state(sol));
    CHECK(std::abs(wrap_pi(ph.gamma[0] - g.raw_aa_phase_plus())) <= 0.05 * kTwoPi);
}

TEST_CASE("unwrap removes 2 pi jumps") {
    const std::vector<double> in = {6.0, 6.2, 0.1, 0.3, 6.1};
    const auto out = unwrap_phases(in);
    CHECK(out[2] == doctest::Approx(0.1 + kTwoPi));
    CHECK(out[3] == doctest::Approx(0.3 + kTwoPi));
    CHECK(out[4] == doctest::Approx(6.1));
}
