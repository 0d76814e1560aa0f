#pragma once

#include <stdexcept>
#include <string>

namespace egocap {

enum class ErrorKind {
    Dimension,
    Index,
    Numeric,
    Data,
    Config,
    Contract,
};

const char* error_kind_name(ErrorKind kind) noexcept;

// Base class for every error raised by the library. `kind()` drives the
// CLI exit-code mapping.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& m) : Error(ErrorKind::Dimension, m) {}
};

class IndexError : public Error {
public:
    explicit IndexError(const std::string& m) : Error(ErrorKind::Index, m) {}
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& m) : Error(ErrorKind::Numeric, m) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& m) : Error(ErrorKind::Data, m) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& m) : Error(ErrorKind::Config, m) {}
};

class ContractError : public Error {
public:
    explicit ContractError(const std::string& m) : Error(ErrorKind::Contract, m) {}
};

}  // namespace egocap
