#pragma once

#include <stdexcept>
#include <string>

namespace cqed {

/// Process exit codes used by the command-line tool.
enum class ExitCode : int {
    success = 0,
    usage = 2,
    data = 3,
    numeric = 4,
};

/// Root of the toolkit's exception hierarchy. Every error knows which exit
/// code the CLI reports for it.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what, ExitCode code)
        : std::runtime_error(what), code_(code) {}

    ExitCode exit_code() const noexcept { return code_; }

private:
    ExitCode code_;
};

/// Invalid arguments to a pure formula (negative rates, non-unit vectors...).
class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error(what, ExitCode::data) {}
};

/// Malformed or inconsistent input data (files, traces, manifests).
class DataError : public Error {
public:
    explicit DataError(const std::string& what, long line = -1)
        : Error(line >= 0 ? what + " (line " + std::to_string(line) + ")" : what, ExitCode::data),
          line_(line) {}

    /// 1-based line number in the offending file, or -1 when not applicable.
    long line() const noexcept { return line_; }

private:
    long line_;
};

class SchemaError : public DataError {
public:
    using DataError::DataError;
};

class InsufficientData : public DataError {
public:
    using DataError::DataError;
};

class NoPeak : public DataError {
public:
    using DataError::DataError;
};

/// Bad starting point handed to the fit engine (NaN model, out of bounds).
class InputError : public DataError {
public:
    using DataError::DataError;
};

/// A numeric procedure failed (singular system, search produced non-finite values).
class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error(what, ExitCode::numeric) {}
};

/// Inconsistent configuration, e.g. an integrator step that is too coarse.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what, ExitCode::usage) {}
};

class UsageError : public Error {
public:
    explicit UsageError(const std::string& what) : Error(what, ExitCode::usage) {}
};

}  // namespace cqed
