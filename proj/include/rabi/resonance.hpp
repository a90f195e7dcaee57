#pragma once

#include "rabi/model.hpp"

namespace rabi {

enum class ResonanceMethod { chrw, second_order, numeric };

struct ResonanceSearch {
    double lo = 0.05;  // in units of omega
    double hi = 4.5;
    int scan_points = 180;
    double rel_tol = 1e-6;
    // Window around the bare seed for the numeric method.
    double window_below = 0.4;
    double window_above = 0.2;
    double window_step = 0.005;
};

// order 1: second harmonic (Omega~ = w); order 2: third harmonic (Omega~ = 2w).
// Throws NoRootInBracket.
double resonance_position(const ModelParams& base, int order, ResonanceMethod method,
                          const NumericPolicy& policy = {}, const ResonanceSearch& search = {});

// Uncertainty of the cyclic states, the quantity whose peaks mark resonances.
double cyclic_uncertainty(const ModelParams& p, const NumericPolicy& policy = {});

const char* method_name(ResonanceMethod m);

}  // namespace rabi
