#pragma once

#include <stdexcept>
#include <string>

namespace hull {

enum class ErrorKind {
    rule_invalid,
    coverage,
    margin,
    precondition,
    inconclusive,
    not_in_hull,
    insufficient_window,
    composition,
    internal,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::rule_invalid: return "rule-invalid";
    case ErrorKind::coverage: return "coverage";
    case ErrorKind::margin: return "margin";
    case ErrorKind::precondition: return "precondition";
    case ErrorKind::inconclusive: return "inconclusive";
    case ErrorKind::not_in_hull: return "patch-not-in-hull";
    case ErrorKind::insufficient_window: return "insufficient-window";
    case ErrorKind::composition: return "composition";
    case ErrorKind::internal: return "internal-consistency";
    }
    return "unknown";
}

/** Error raised by any module; carries the module name for CLI reporting. */
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string module, const std::string& what)
        : std::runtime_error(module + ": " + to_string(kind) + ": " + what),
          kind_(kind), module_(std::move(module)) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& module() const noexcept { return module_; }

private:
    ErrorKind kind_;
    std::string module_;
};

} // namespace hull
