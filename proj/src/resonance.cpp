#include "rabi/resonance.hpp"

#include <boost/math/tools/toms748_solve.hpp>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rabi/chrw.hpp"
#include "rabi/errors.hpp"
#include "rabi/floquet.hpp"
#include "rabi/geometry.hpp"
#include "rabi/propagator.hpp"

namespace rabi {
namespace {

// First upward sign change of f on the scan grid, refined by TOMS 748.
double upward_root(const std::function<double(double)>& f, double lo, double hi, int n,
                   double rel_tol, const std::string& what) {
    double a = lo, fa = f(lo);
    for (int i = 1; i <= n; ++i) {
        const double b = lo + (hi - lo) * i / n;
        const double fb = f(b);
        if (fa < 0.0 && fb >= 0.0) {
            if (fb == 0.0) return b;
            std::uintmax_t iters = 200;
            const auto tol = [rel_tol](double x, double y) {
                return std::abs(x - y) <= rel_tol * std::min(std::abs(x), std::abs(y));
            };
            const auto r = boost::math::tools::toms748_solve(f, a, b, fa, fb, tol, iters);
            return 0.5 * (r.first + r.second);
        }
        a = b;
        fa = fb;
    }
    throw NoRootInBracket("no sign change of the " + what + " condition in [" +
                          std::to_string(lo) + ", " + std::to_string(hi) + "]");
}

}  // namespace

const char* method_name(ResonanceMethod m) {
    switch (m) {
        case ResonanceMethod::chrw: return "chrw";
        case ResonanceMethod::second_order: return "second_order";
        case ResonanceMethod::numeric: return "numeric";
    }
    return "?";
}

double cyclic_uncertainty(const ModelParams& p, const NumericPolicy& policy) {
    const PropagationResult r = propagate(p, policy);
    const CyclicDecomposition d = cyclic_decomposition(r.final_unitary(), p);
    return time_energy_uncertainty(r, d.states[0], p);
}

double resonance_position(const ModelParams& base, int order, ResonanceMethod method,
                          const NumericPolicy& policy, const ResonanceSearch& search) {
    if (order != 1 && order != 2) throw InvalidParams("resonance order must be 1 or 2");
    const double w = base.omega;
    const double lo = search.lo * w, hi = search.hi * w;
    auto at = [&](double delta) {
        ModelParams p = base;
        p.delta = delta;
        return p;
    };

    switch (method) {
        case ResonanceMethod::chrw:
            return upward_root(
                [&](double d) { return solve_self_consistent(at(d), policy).Omega_t - order * w; },
                lo, hi, search.scan_points, search.rel_tol, "Omega~ = m w");
        case ResonanceMethod::second_order:
            return upward_root(
                [&](double d) { return rabi_frequency_2nd_order(at(d)).frequency - order * w; }, lo,
                hi, search.scan_points, search.rel_tol, "second-order Rabi");
        case ResonanceMethod::numeric: {
            const double bare = (order + 1) * w;
            const double seed = bare > base.epsilon
                                    ? std::sqrt(bare * bare - base.epsilon * base.epsilon)
                                    : lo;
            const double a = std::max(lo, seed - search.window_below * w);
            const double b = std::min(hi, seed + search.window_above * w);
            const int n = std::max(8, static_cast<int>(std::ceil((b - a) / (search.window_step * w))));
            std::vector<double> s(n + 1);
            auto s_at = [&](double d) { return cyclic_uncertainty(at(d), policy); };
            for (int i = 0; i <= n; ++i) s[i] = s_at(a + (b - a) * i / n);
            int best = -1;
            for (int i = 1; i < n; ++i)
                if (s[i] >= s[i - 1] && s[i] > s[i + 1] && (best < 0 || s[i] > s[best])) best = i;
            if (best < 0)
                throw NoRootInBracket("uncertainty has no interior maximum in the search window");
            const double h = (b - a) / n;
            const double x = a + best * h;
            return golden_section(s_at, x - h, x + h, search.rel_tol * x, -1.0);
        }
    }
    throw InvalidParams("unknown resonance method");
}

}  // namespace rabi
