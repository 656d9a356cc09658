#pragma once

#include <stdexcept>
#include <string>

namespace hdsi {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input text (COO files, config documents). Carries a 1-based
// line number when one is known.
struct ParseError : Error {
    ParseError(const std::string& msg, long line = 0)
        : Error(line > 0 ? msg + " (line " + std::to_string(line) + ")" : msg), line_number(line) {}
    long line_number;
};

// Structurally valid input that violates a domain invariant.
struct ValidationError : Error {
    using Error::Error;
};

// Tensor/matrix dimension mismatch; message names the offending axis.
struct ShapeError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

// Checkpoint document problems, split by cause so callers can distinguish.
struct FormatError : Error {
    using Error::Error;
};
struct VersionError : Error {
    using Error::Error;
};

// Training objective became NaN/Inf.
struct DivergenceError : Error {
    DivergenceError(const std::string& msg, long epoch_) : Error(msg), epoch(epoch_) {}
    long epoch;
};

}  // namespace hdsi
