#pragma once

#include <stdexcept>
#include <string>

namespace imdac {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite state encountered during integration.
class DivergenceError : public Error {
public:
    DivergenceError(double t, const std::string& what) : Error(what), time_(t) {}
    double time() const noexcept { return time_; }

private:
    double time_;
};

/// Malformed scenario document; carries the 1-based offending line (0 when not tied to a line).
class ParseError : public Error {
public:
    ParseError(int line, const std::string& msg)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg), line_(line) {}
    int line() const noexcept { return line_; }

private:
    int line_;
};

}  // namespace imdac
