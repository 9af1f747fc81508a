#pragma once

#include <stdexcept>
#include <string>

namespace atomlaser {

// Base class for all toolkit errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad or inconsistent configuration / input values. CLI exit code 2.
struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// A numerical guard tripped before or during a run (grid coverage, revival
// time, CFL-like step bound, boundary population). CLI exit code 3.
struct NumericalGuardError : Error {
    NumericalGuardError(const std::string& guard, const std::string& msg)
        : Error("guard '" + guard + "': " + msg), guard_name(guard) {}
    std::string guard_name;
};

// The integration itself went wrong (norm drift, accounting violation,
// non-convergence of an iterative solve). CLI exit code 4.
struct DivergenceError : Error {
    explicit DivergenceError(const std::string& msg) : Error(msg) {}
};

// Analysis-level failures: clipped spectra, multi-peak input to a
// single-peak estimator, model mismatch in a fit.
struct AnalysisError : Error {
    explicit AnalysisError(const std::string& msg) : Error(msg) {}
};

} // namespace atomlaser
