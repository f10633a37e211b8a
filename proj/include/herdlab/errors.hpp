#pragma once

#include <stdexcept>
#include <string>

namespace herdlab {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A computation produced a non-finite intermediate.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, double offending_value)
        : std::runtime_error(what), offending_value_(offending_value) {}

    double offending_value() const noexcept { return offending_value_; }

private:
    double offending_value_;
};

/// A bounded iteration ran out of steps before reaching its target.
class HorizonExhausted : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid experiment configuration; the message names the field.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace herdlab
