#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace lfsim {

// Base of every error thrown by the library. kind() is a short stable tag
// used by the CLI to print machine-parsable diagnostics.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "error"; }
};

class ParseError : public Error {
public:
    ParseError(const std::string& file, std::size_t line, const std::string& what)
        : Error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}
    const char* kind() const noexcept override { return "parse"; }
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ValidationError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "validation"; }
};

class ConfigError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "config"; }
};

class RoutingError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "routing"; }
};

class CapacityError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "capacity"; }
};

class NotFoundError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "not_found"; }
};

class TrainingError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "training"; }
};

// Half-open interval [start, end) in seconds.
struct Window {
    double start = 0.0;
    double end = 0.0;

    double length() const { return end - start; }
    bool valid() const { return start < end; }
    friend bool operator==(const Window&, const Window&) = default;
};

inline double overlap(const Window& a, const Window& b) {
    const double lo = a.start > b.start ? a.start : b.start;
    const double hi = a.end < b.end ? a.end : b.end;
    return hi > lo ? hi - lo : 0.0;
}

// Shortest round-trip decimal representation; used by every CSV/JSON writer so
// outputs are byte-stable.
std::string format_number(double v);

}  // namespace lfsim
