#pragma once

#include <stdexcept>
#include <string>

namespace lstmeq {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid parameter or configuration value.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Vector or matrix dimensions do not agree.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Input data is unusable (too short, empty, missing a logic level).
class DataError : public Error {
public:
    using Error::Error;
};

/// Malformed text input. `line()` is 1-based, 0 when unknown.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Least-squares or tap fitting failed.
class FitError : public Error {
public:
    using Error::Error;
};

/// Training diverged (non-finite loss).
class TrainingError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace lstmeq
