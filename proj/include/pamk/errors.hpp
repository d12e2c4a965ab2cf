#pragma once

#include <stdexcept>
#include <string>

namespace pamk {

// Error taxonomy shared by all modules. The CLI maps these onto exit codes.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid content of a configuration object (bad field values, impossible sizes).
struct ConfigError : Error {
    using Error::Error;
};

// Invalid call argument (out-of-range index, mismatched lengths, empty input).
struct ArgumentError : Error {
    using Error::Error;
};

// Tensor / matrix dimension mismatch.
struct ShapeError : Error {
    using Error::Error;
};

// A multi-step pipeline could not complete (e.g. time alignment failed).
struct PipelineError : Error {
    using Error::Error;
};

// Training diverged or otherwise failed numerically.
struct TrainingError : Error {
    using Error::Error;
};

// Valid request for a configuration this build deliberately does not support.
struct UnsupportedError : Error {
    using Error::Error;
};

// Filesystem / parsing failures around external artifacts.
struct IoError : Error {
    using Error::Error;
};

} // namespace pamk
