#pragma once

#include <stdexcept>
#include <string>

namespace solen {

/// Invalid parameters or malformed input data. CLI exit code 1.
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed file content (bad header, bad row). CLI exit code 1.
struct ParseError : ValidationError {
    explicit ParseError(const std::string& what) : ValidationError(what) {}
};

/// Filesystem failure. CLI exit code 2.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical domain failure (non-physical input, root not bracketed). CLI exit code 3.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace solen
