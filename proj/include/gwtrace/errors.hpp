#pragma once

#include <stdexcept>
#include <string>

namespace gwtrace {

// Base class for every error the library throws, so callers can catch one
// type at the boundary and still switch on the finer-grained ones below.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// An offspring law that puts mass on zero children.  The whole toolkit
// assumes trees that never die out, so this is rejected at construction.
class ZeroOffspringError : public Error {
public:
    using Error::Error;
};

// An offspring law whose mean is <= 1.  Growth rates, normalizations, and
// series all divide by (m - 1) or log m, so subcritical/critical input is
// rejected rather than producing nonsense downstream.
class SubcriticalError : public Error {
public:
    using Error::Error;
};

// Probabilities that do not sum to 1 within tolerance.
class BadMassError : public Error {
public:
    using Error::Error;
};

// A numeric argument outside its admissible range (negative rate, alpha
// outside [0,1), tolerance <= 0, pgf argument outside [0,1], ...).
class DomainError : public Error {
public:
    using Error::Error;
};

// Raised when a requested simulation or series evaluation would allocate or
// visit more nodes than the configured budget.  The message names the
// parameter to relax.
class NodeBudgetError : public Error {
public:
    using Error::Error;
};

// Raised by quantities that are only defined for non-degenerate offspring
// laws (e.g. fluctuation coefficients that vanish identically when the
// offspring count is constant).
class DeterministicOffspringError : public Error {
public:
    using Error::Error;
};

// Malformed configuration input: unparseable pmf strings, unknown keys,
// unsorted grids, missing required fields.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Filesystem failures while reading configs or writing reports.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace gwtrace
