#pragma once

#include <stdexcept>
#include <string>

namespace pfge {

/// Base of every error the library throws. `exit_code()` is the process
/// status the CLI reports for it.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 1; }
};

/// Invalid configuration: bad layer spec, budget divisibility, config fields.
class ConfigError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

/// Dimension or spec mismatch between operands.
class ShapeError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

/// Precondition violation on a call argument (empty batch, t outside [0,1], ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

/// File missing or unreadable.
class IoError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

/// Malformed file contents (bad magic, truncated payload, digest mismatch,
/// unparsable CSV cell).
class FormatError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

/// A NaN or Inf showed up in a loss or weight vector.
class NumericError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 4; }
};

}  // namespace pfge
