#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fleetcast {

/// Base class for all errors raised by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Dimension mismatch between tensors, layers, or trajectories.
struct ShapeError : Error {
    using Error::Error;
};

/// Numerical blow-up detected (non-finite values or norm guard tripped).
struct DivergenceError : Error {
    DivergenceError(const std::string& msg, std::size_t step_index)
        : Error(msg + " (integration step " + std::to_string(step_index) + ")"),
          step(step_index) {}
    explicit DivergenceError(const std::string& msg) : Error(msg), step(0) {}
    std::size_t step;
};

/// Invalid or inconsistent configuration input.
struct ConfigError : Error {
    using Error::Error;
};

/// File format or filesystem failure; message carries the path.
struct IoError : Error {
    using Error::Error;
};

/// Decoded heading channels too close to the origin to recover an angle.
struct DegenerateHeadingError : Error {
    using Error::Error;
};

}  // namespace fleetcast
