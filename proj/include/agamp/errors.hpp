#pragma once

#include <stdexcept>
#include <string>

namespace agamp {

// Invalid argument to a numerical routine (tau <= 0, bad dimension, ...).
struct DomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Bad run configuration (empty grid, too few MC samples, ...).
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite channel rate or quadrature accumulation; carries the offending
// component index when known (-1 otherwise).
struct ChannelOverflowError : std::runtime_error {
    explicit ChannelOverflowError(const std::string& msg, long index = -1)
        : std::runtime_error(msg), index(index) {}
    long index;
};

// GAMP iteration produced a non-finite vector or a non-positive tau_s.
struct DivergenceError : std::runtime_error {
    DivergenceError(const std::string& step, int iter)
        : std::runtime_error("gamp diverged at step '" + step + "', iteration " +
                             std::to_string(iter)),
          step(step),
          iter(iter) {}
    std::string step;
    int iter;
};

struct SeDivergenceError : std::runtime_error {
    SeDivergenceError(const std::string& what, int iter)
        : std::runtime_error("state evolution diverged: " + what + " at iteration " +
                             std::to_string(iter)),
          iter(iter) {}
    int iter;
};

struct AdaptationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace agamp
