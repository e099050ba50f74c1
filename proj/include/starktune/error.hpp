#pragma once

#include <stdexcept>
#include <string>

namespace starktune {

// Root of all library errors. The CLI maps each subclass to its own exit
// status; plain std::invalid_argument is used for violated preconditions of
// the pure math functions.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid configuration or parameter set (schema violations, bad ranges).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Malformed or inconsistent input data (bad CSV, grid mismatch).
class DataError : public Error {
public:
    using Error::Error;
};

// A profile or expansion that is undefined for the given inputs
// (zero-width Voigt, degenerate level energies).
class DegenerateError : public Error {
public:
    using Error::Error;
};

class FitError : public Error {
public:
    enum class Reason { non_convergence, no_peak, rank_deficient, bad_input };

    FitError(Reason reason, const std::string& what)
        : Error(what), reason_(reason) {}

    Reason reason() const noexcept { return reason_; }

private:
    Reason reason_;
};

// Target cannot be reached inside the constraints; `binding()` names the
// constraint that blocks it.
class InfeasibleError : public Error {
public:
    InfeasibleError(std::string binding, const std::string& what)
        : Error(what), binding_(std::move(binding)) {}

    const std::string& binding() const noexcept { return binding_; }

private:
    std::string binding_;
};

} // namespace starktune
