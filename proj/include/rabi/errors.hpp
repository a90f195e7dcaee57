#pragma once

#include <stdexcept>
#include <string>

namespace rabi {

// Base for every failure the library signals. Degenerate or near-singular
// situations are reported through result flags instead.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidParams : Error {
    using Error::Error;
};
struct StepFailure : Error {
    using Error::Error;
};
struct UnitarityLoss : Error {
    using Error::Error;
};
struct NoConvergence : Error {
    using Error::Error;
    double residual_xi = 0.0;
    double residual_zeta = 0.0;
};
struct NoRootInBracket : Error {
    using Error::Error;
};
struct DomainError : Error {
    using Error::Error;
};
struct NonConvergent : Error {
    using Error::Error;
};

}  // namespace rabi
