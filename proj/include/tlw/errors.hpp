#pragma once

#include <stdexcept>
#include <string>

namespace tlw {

// Rejected input. `reason` is a short machine-readable tag
// (dimension, amplitude, regime, threshold, domain, shape, config).
class ValidationError : public std::invalid_argument {
public:
    ValidationError(std::string reason, const std::string& what)
        : std::invalid_argument(what), reason_(std::move(reason)) {}
    const std::string& reason() const noexcept { return reason_; }

private:
    std::string reason_;
};

// A numerical procedure did not reach its stated tolerance.
class NumericalError : public std::runtime_error {
public:
    NumericalError(std::string reason, const std::string& what)
        : std::runtime_error(what), reason_(std::move(reason)) {}
    const std::string& reason() const noexcept { return reason_; }

private:
    std::string reason_;
};

inline void require(bool ok, const char* reason, const std::string& what) {
    if (!ok) throw ValidationError(reason, what);
}

}  // namespace tlw
