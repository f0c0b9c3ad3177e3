#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace steady_replay {

/// Violated precondition on a call (shape mismatch, step after episode end, ...).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Invalid configuration. Carries the 1-based source line when it came from a file (0 otherwise).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what, std::size_t line = 0)
        : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
          line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// A non-finite value showed up in gradients or losses.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SettleTimeout : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Sampling asked for more data than the buffer holds.
class InsufficientData : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed checkpoint, CSV or other on-disk artifact.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace steady_replay
