#pragma once

#include <stdexcept>
#include <string>

namespace ecx {

// Base for every error the library throws on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input file does not match the declared column layout.
class SchemaError : public Error {
public:
    using Error::Error;
};

// Bad size-class table, crosswalk, run config or option value.
class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Matrix has no usable structure left (empty after pruning, single region, ...).
class DegenerateError : public Error {
public:
    using Error::Error;
};

// NaN, overflow, zero variance, rank deficiency.
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace ecx
