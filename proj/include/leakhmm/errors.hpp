#pragma once

#include <stdexcept>
#include <string>

namespace leakhmm {

// Invalid input: bad configuration, inadmissible parametrization, malformed
// files, sequences that violate preconditions. CLI maps this to exit code 2.
struct SpecError : std::runtime_error {
    explicit SpecError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure: zero-likelihood observations, optimizer breakdown,
// all restarts rejected. CLI maps this to exit code 3.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace leakhmm
