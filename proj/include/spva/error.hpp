#pragma once

#include <stdexcept>
#include <string>

namespace spva {

/// Failure categories. The numeric values double as CLI exit codes.
enum class ErrorKind : int {
    validation = 2,
    format = 3,
    numerical = 4,
    insufficient_clean_frames = 5,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

/// Bad arguments, dimension mismatches, non-finite input, config errors.
class InvalidInput : public Error {
public:
    explicit InvalidInput(const std::string& what)
        : Error(ErrorKind::validation, what) {}
};

/// Malformed files and I/O failures.
class FormatError : public Error {
public:
    explicit FormatError(const std::string& what)
        : Error(ErrorKind::format, what) {}
};

/// Rank deficiency, singular blocks, ambiguous projections.
class DegenerateError : public Error {
public:
    explicit DegenerateError(const std::string& what)
        : Error(ErrorKind::numerical, what) {}
};

/// Non-finite iterate inside a solver loop.
class DivergenceError : public Error {
public:
    explicit DivergenceError(const std::string& what)
        : Error(ErrorKind::numerical, what) {}
};

class InsufficientCleanFrames : public Error {
public:
    explicit InsufficientCleanFrames(const std::string& what)
        : Error(ErrorKind::insufficient_clean_frames, what) {}
};

}  // namespace spva
