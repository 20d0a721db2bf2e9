#pragma once

#include <stdexcept>
#include <string>

namespace rfrr {

// Bad input: exit code 1 at the CLI.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Solver, factorization or accuracy failure: exit code 2 at the CLI.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class OverflowError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class AssumptionError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

}  // namespace rfrr
