#pragma once

#include <stdexcept>
#include <string>

namespace volblend {

/// Base of every error thrown by the library. `kind()` maps onto CLI exit codes.
class Error : public std::runtime_error {
public:
    enum class Kind { Config, Data, Numerical };

    Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

/// Malformed input file or row.
class ParseError : public Error {
public:
    explicit ParseError(const std::string& what) : Error(Kind::Data, what) {}
};

/// A value violates a domain invariant (non-positive price, bad shape parameter, ...).
class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error(Kind::Data, what) {}
};

/// Inconsistent sizes, too-short series, out-of-range indices.
class LengthError : public Error {
public:
    explicit LengthError(const std::string& what) : Error(Kind::Data, what) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(Kind::Config, what) {}
};

/// Non-finite values, divergence, solver failure.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(Kind::Numerical, what) {}
};

}  // namespace volblend
