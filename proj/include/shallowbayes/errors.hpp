#pragma once

#include <stdexcept>
#include <string>

namespace shallowbayes {

// Argument outside the mathematical domain of an operation (|x| > 1 for g, negative variance, ...).
struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Iterative procedure exhausted its budget without meeting tolerance.
struct ConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad or inconsistent user configuration.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace shallowbayes
