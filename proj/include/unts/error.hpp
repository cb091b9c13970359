#pragma once

#include <stdexcept>
#include <string>

namespace unts {

// Base for all library errors. Subclasses exist where callers need to
// distinguish usage/config problems (exit code 2) from runtime failures.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Operator input shapes do not match; message names the offending node.
struct ShapeError : Error {
    using Error::Error;
};

// An operation was called outside its contract (e.g. backward on a
// non-scalar root, missing gradient on a listed parameter).
struct ContractError : Error {
    using Error::Error;
};

// Malformed input file; message carries the line number where known.
struct ParseError : Error {
    using Error::Error;
};

// Bad configuration: unknown key, invalid value, missing required path.
struct ConfigError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

} // namespace unts
