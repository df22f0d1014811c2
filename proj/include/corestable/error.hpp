#pragma once

#include <cstddef>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace corestable {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text. Carries the 1-based line and column when known.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line, std::size_t column)
        : Error(what + " (line " + std::to_string(line) + ", column " +
                std::to_string(column) + ")"),
          line_(line), column_(column) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

/// Precondition violated by the caller.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// An iterative method ran out of iterations before reaching its tolerance.
class NonConvergence : public Error {
public:
    NonConvergence(const std::string& what, double residual)
        : Error(what + " (residual " + format(residual) + ")"), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    static std::string format(double r) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3g", r);
        return buf;
    }
    double residual_;
};

/// An exhaustive method refused to run because the input is too large.
class GuardExceeded : public Error {
public:
    using Error::Error;
};

}  // namespace corestable
