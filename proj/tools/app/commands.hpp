#pragma once

#include <string>

#include "app/config.hpp"

namespace app {

enum ExitCode : int { kOk = 0, kConfigError = 2, kPartialFailure = 3, kNumericFailure = 4 };

int run_sweep(json cfg, const Overrides& o);
int run_dynamics(json cfg, const Overrides& o);
int run_resonance(json cfg, const Overrides& o);
int run_spectrum(json cfg, const Overrides& o);
int run_check(json cfg, const Overrides& o);

}  // namespace app
