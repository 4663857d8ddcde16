#pragma once

#include <stdexcept>
#include <string>

namespace noisemod {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Tensor shape or dimension mismatch.
struct ShapeError : Error {
    using Error::Error;
};

/// Invalid configuration (bad flag value, inconsistent model spec, ...).
struct ConfigError : Error {
    using Error::Error;
};

/// Dataset or file I/O failure (bad magic, truncated file, ...).
struct DataError : Error {
    using Error::Error;
};

/// Numerical failure (NaN loss, degenerate carrier, ...).
struct NumericError : Error {
    using Error::Error;
};

} // namespace noisemod
