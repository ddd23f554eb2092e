#pragma once

#include <stdexcept>
#include <string>

namespace fame {

// Base for all toolkit errors. CLI maps IoError to exit code 3 and every
// other Error to exit code 2.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input bytes/text (PGM headers, manifests, binary containers).
struct ParseError : Error {
    using Error::Error;
};

// Precondition violations on operation arguments.
struct ArgumentError : Error {
    using Error::Error;
};

// Shape/size mismatches between images, patches, codebooks, models.
struct DimensionError : ArgumentError {
    using ArgumentError::ArgumentError;
};

// Non-finite inputs or failed numeric routines.
struct NumericError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

}  // namespace fame
