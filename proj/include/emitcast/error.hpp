#pragma once

#include <stdexcept>
#include <string>

namespace emitcast {

/// Broad failure class. The CLI maps these onto process exit codes.
enum class ErrorKind {
    Input,      ///< bad user input, schema or validation failure (exit 2)
    Numerical,  ///< estimation failed to converge or diverged (exit 2)
    Invariant,  ///< internal invariant breach (exit 3)
    Io,         ///< filesystem failure (exit 2)
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class InputError : public Error {
public:
    explicit InputError(const std::string& what) : Error(ErrorKind::Input, what) {}
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(ErrorKind::Numerical, what) {}
};

class InvariantError : public Error {
public:
    explicit InvariantError(const std::string& what) : Error(ErrorKind::Invariant, what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

inline int exit_code_for(ErrorKind kind) noexcept {
    return kind == ErrorKind::Invariant ? 3 : 2;
}

}  // namespace emitcast
