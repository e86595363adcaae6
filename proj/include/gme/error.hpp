#pragma once

#include <stdexcept>
#include <string>

namespace gme {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid argument or violated precondition (bad config value, empty input, ...).
struct InvalidArgument : Error {
    using Error::Error;
};

/// Shape mismatch between operands.
struct DimensionError : Error {
    using Error::Error;
};

/// Malformed or truncated binary payload.
struct CorruptFormatError : Error {
    using Error::Error;
};

/// Payload has a well-formed header but an unsupported format version.
struct VersionError : Error {
    using Error::Error;
};

/// Filesystem-level failure (missing file, short write, ...).
struct IoError : Error {
    using Error::Error;
};

/// Text record that failed to parse (carries the offending line number).
struct ParseError : Error {
    ParseError(const std::string& msg, std::size_t line)
        : Error(msg + " (line " + std::to_string(line) + ")"), line_number(line) {}
    std::size_t line_number;
};

}  // namespace gme
