#pragma once

#include <stdexcept>
#include <string>

namespace lfr {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid DisplayConfig, calibration profile or dimension mismatch.
struct ConfigError : Error {
    using Error::Error;
};

/// Camera/plane arrangement that cannot be projected (plane behind camera etc).
struct GeometryError : Error {
    using Error::Error;
};

/// Malformed input file (bad header, missing property).
struct FormatError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

/// Out-of-range index or unknown enumerator passed by a caller.
struct ArgumentError : Error {
    using Error::Error;
};

}  // namespace lfr
