#pragma once

#include <stdexcept>
#include <string>

namespace ppgfm {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidInput : Error {
    using Error::Error;
};

// Window with max-min range too small to normalize.
struct DegenerateWindow : Error {
    using Error::Error;
};

// Optimal-scale query at a point where the optimum collapses to zero.
struct Degenerate : Error {
    using Error::Error;
};

struct InvalidConfig : Error {
    using Error::Error;
};

struct SequenceTooLong : Error {
    using Error::Error;
};

// NaN/Inf encountered in activations or loss.
struct NumericalFailure : Error {
    using Error::Error;
};

struct UnsupportedCheckpoint : Error {
    using Error::Error;
};

struct CorruptCheckpoint : Error {
    using Error::Error;
};

struct CorruptDataset : Error {
    using Error::Error;
};

}  // namespace ppgfm
