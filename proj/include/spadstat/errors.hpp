#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace spadstat {

// Base for everything thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad argument values: out-of-range indices, negative rates, zero targets.
struct DomainError : Error {
    using Error::Error;
};

// A model produced a per-slot probability outside [0,1) or a divergent total.
struct ModelError : Error {
    using Error::Error;
};

// A series or iterative procedure failed to meet tolerance within its cap.
struct ConvergenceError : Error {
    using Error::Error;
};

// Regression failure: too few usable bins, non-positive slope, degenerate region.
struct FitError : Error {
    using Error::Error;
};

// File-level problems (open/read/write).
struct IoError : Error {
    using Error::Error;
};

// Structurally invalid file contents: magic, version, truncation, schema.
struct FormatError : IoError {
    using IoError::IoError;
};

// Well-formed container carrying inconsistent data (e.g. non-monotonic tags).
// byte_offset locates the first offending item where the source is a file.
struct DataError : IoError {
    std::uint64_t byte_offset = 0;
    DataError(const std::string& what, std::uint64_t offset)
        : IoError(what), byte_offset(offset) {}
    explicit DataError(const std::string& what) : IoError(what) {}
};

} // namespace spadstat
