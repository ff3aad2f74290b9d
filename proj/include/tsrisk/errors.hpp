#pragma once

#include <stdexcept>
#include <string>

namespace tsrisk {

// Root of every exception thrown by the library. The C API maps each
// subclass onto a status code, see tsrisk.h.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad arguments, bad configuration, precondition violations.
class UsageError : public Error {
public:
    using Error::Error;
};

// Malformed or inconsistent input data.
class DataError : public Error {
public:
    using Error::Error;
};

// Corrupt or incompatible file container.
class FormatError : public DataError {
public:
    using DataError::DataError;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

// NaN/Inf produced during evaluation or training.
class NumericError : public Error {
public:
    using Error::Error;
};

} // namespace tsrisk
