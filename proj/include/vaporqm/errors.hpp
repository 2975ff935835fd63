#pragma once

#include <stdexcept>
#include <string>

namespace vqm {

/// Bad input: schema violations, out-of-range parameters, malformed files.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Solver or fit failure: non-finite values, step-size violations, non-convergence.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace vqm
