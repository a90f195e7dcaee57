#include <doctest.h>

#include "rabi/chrw.hpp"
#include "rabi/errors.hpp"
#include "rabi/resonance.hpp"

using namespace rabi;

TEST_CASE("CHRW resonance satisfies the frequency condition") {
    for (int order : {1, 2}) {
        const ModelParams base{0.0, 0.5, 1.0, 1.0};
        const double d = resonance_position(base, order, ResonanceMethod::chrw);
        ModelParams p = base;
        p.delta = d;
        CHECK(solve_self_consistent(p).Omega_t == doctest::Approx(order * 1.0).epsilon(1e-6));
    }
}

TEST_CASE("numeric resonances match known peak positions") {
    CHECK(resonance_position({0.0, 0.8, 1.0, 1.0}, 2, ResonanceMethod::numeric) == doctest::Approx(2.79931).epsilon(1e-4));
    CHECK(resonance_position({0.0, 0.5, 1.0, 1.0}, 1, ResonanceMethod::numeric) == doctest::Approx(1.76914).epsilon(1e-4));
}

TEST_CASE("methods agree at weak bias") {
    const ModelParams base{0.0, 0.3, 1.0, 1.0};
    const double c = resonance_position(base, 1, ResonanceMethod::chrw);
    const double n = resonance_position(base, 1, ResonanceMethod::numeric);
    CHECK(std::abs(c - n) < 0.05);
}

TEST_CASE("second-order formula gives the first resonance") {
    const double d = resonance_position({0.0, 0.3, 0.5, 1.0}, 1, ResonanceMethod::second_order);
    ModelParams p{d, 0.3, 0.5, 1.0};
    CHECK(rabi_frequency_2nd_order(p).frequency == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("search failures and invalid orders") {
    CHECK_THROWS_AS(resonance_position({0.0, 0.5, 1.0, 1.0}, 3, ResonanceMethod::chrw), InvalidParams);
    ResonanceSearch narrow;
    narrow.lo = 0.05;
    narrow.hi = 0.2;
    CHECK_THROWS_AS(resonance_position({0.0, 0.5, 1.0, 1.0}, 1, ResonanceMethod::chrw, {}, narrow), NoRootInBracket);
}

TEST_CASE("method names") {
    CHECK(std::string(method_name(ResonanceMethod::chrw)) == "chrw");
    CHECK(std::string(method_name(ResonanceMethod::second_order)) == "second_order");
    CHECK(std::string(method_name(ResonanceMethod::numeric)) == "numeric");
}
