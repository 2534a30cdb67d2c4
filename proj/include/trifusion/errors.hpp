#pragma once

#include <stdexcept>
#include <string>

namespace trifusion {

// Error categories surfaced by the CLI as "error (<category>): <message>".

struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ValueError : std::runtime_error {
    explicit ValueError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite loss or gradients during optimization.
struct DivergenceError : std::runtime_error {
    explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

inline const char* error_category(const std::exception& e) {
    if (dynamic_cast<const ShapeError*>(&e)) return "shape";
    if (dynamic_cast<const ValueError*>(&e)) return "value";
    if (dynamic_cast<const ConfigError*>(&e)) return "config";
    if (dynamic_cast<const IoError*>(&e)) return "io";
    if (dynamic_cast<const DivergenceError*>(&e)) return "divergence";
    return "internal";
}

}  // namespace trifusion
