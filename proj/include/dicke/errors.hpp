// errors.hpp: exception types shared by the engine

#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

namespace dicke {

/// Base class for all engine errors. Numerical failures map to CLI exit code 3.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Input outside the mathematical domain of an operation (e.g. 1 - 4Γ/ω_b <= 0).
struct DomainError : Error {
    using Error::Error;
};

/// Bad or inconsistent configuration. CLI exit code 2.
struct ConfigError : Error {
    using Error::Error;
};

/// Problem size exceeds a configured bound.
struct ResourceError : Error {
    using Error::Error;
};

struct ConvergenceError : Error {
    ConvergenceError(const std::string& what, double last_residual)
        : Error(what), residual(last_residual) {}
    double residual;
};

struct IntegratorError : Error {
    using Error::Error;
};

/// Mean spin vanishes, so the Ramsey parameter is undefined.
struct DegenerateSpinError : Error {
    using Error::Error;
};

/// Operation only defined for a particular squeezing scheme.
struct SchemeError : Error {
    using Error::Error;
};

struct RegimeError : Error {
    using Error::Error;
};

/// Carries the parameter iterates (a, b, const) visited before giving up.
struct FitDivergenceError : Error {
    FitDivergenceError(const std::string& what, std::vector<std::array<double, 3>> trace = {})
        : Error(what), iterates(std::move(trace)) {}
    std::vector<std::array<double, 3>> iterates;
};

}  // namespace dicke
