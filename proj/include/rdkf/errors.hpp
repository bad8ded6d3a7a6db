#pragma once

#include <stdexcept>
#include <string>

namespace rdkf {

// Thrown when an otherwise well-posed computation fails numerically:
// an infeasible exponential tilt, a diverging fixed-point iteration, a
// root-finder that runs out of iterations. Callers (the CLI in particular)
// distinguish these from plain contract violations (std::invalid_argument).
struct numerical_error : std::runtime_error {
    explicit numerical_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when the distributed protocol is driven out of order, e.g. a fusion
// step that is missing data for an in-neighbor.
struct protocol_error : std::logic_error {
    explicit protocol_error(const std::string& msg) : std::logic_error(msg) {}
};

// Thrown when reading or writing artifacts fails.
struct io_error : std::runtime_error {
    explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace rdkf
