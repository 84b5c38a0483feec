#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ogan {

/// Coarse failure class; the CLI maps each one to an exit code.
enum class ErrorCategory {
    argument,  // bad arguments, config, shapes
    io,        // file system and file format problems
    numeric,   // non-finite values during training
};

inline std::string_view category_name(ErrorCategory c) {
    switch (c) {
    case ErrorCategory::argument: return "argument";
    case ErrorCategory::io: return "io";
    case ErrorCategory::numeric: return "numeric";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

class ArgumentError : public Error {
public:
    explicit ArgumentError(const std::string& what) : Error(ErrorCategory::argument, what) {}
};

class ShapeError : public ArgumentError {
public:
    using ArgumentError::ArgumentError;
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorCategory::io, what) {}
};

/// Malformed on-disk data. `kind` distinguishes the individual diagnostics.
class FormatError : public Error {
public:
    enum class Kind {
        malformed_header,
        extent_overflow,
        truncated,
        unsupported_depth,
        bad_magic,
        bad_version,
        bad_record,
    };

    FormatError(Kind kind, const std::string& what) : Error(ErrorCategory::io, what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error(ErrorCategory::numeric, what) {}
};

}  // namespace ogan
