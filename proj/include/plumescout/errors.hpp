#pragma once

#include <stdexcept>
#include <string>

namespace plumescout {

// Error taxonomy mirrored by CLI exit codes: IO=2, CONFIG=3, NUMERIC=4.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error("IO: " + msg) {}
};

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error("CONFIG: " + msg) {}
};

class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error("NUMERIC: " + msg) {}
};

enum class ErrorCategory { None = 0, Io = 2, Config = 3, Numeric = 4 };

inline const char* category_name(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::Io: return "IO";
        case ErrorCategory::Config: return "CONFIG";
        case ErrorCategory::Numeric: return "NUMERIC";
        default: return "OK";
    }
}

}  // namespace plumescout
