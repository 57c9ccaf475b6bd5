#pragma once
#include <stdexcept>
#include <string>

namespace brwre {

// Invalid configuration or arguments. CLI maps these to exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct WeightSumError : ConfigError {
    explicit WeightSumError(const std::string& msg) : ConfigError(msg) {}
};

struct PmfError : ConfigError {
    explicit PmfError(const std::string& msg) : ConfigError(msg) {}
};

struct DomainError : ConfigError {
    explicit DomainError(const std::string& msg) : ConfigError(msg) {}
};

struct BudgetError : ConfigError {
    explicit BudgetError(const std::string& msg) : ConfigError(msg) {}
};

// Numeric aborts. CLI maps these to exit code 3.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// A count or an exact-arithmetic intermediate left its representable range.
struct OverflowError : NumericError {
    explicit OverflowError(const std::string& msg) : NumericError(msg) {}
};

// An enumeration or resource cap was exceeded.
struct CapError : NumericError {
    explicit CapError(const std::string& msg) : NumericError(msg) {}
};

struct IoError : NumericError {
    explicit IoError(const std::string& msg) : NumericError(msg) {}
};

}  // namespace brwre
