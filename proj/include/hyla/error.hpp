#pragma once

#include <stdexcept>
#include <string>

namespace hyla {

// Base for every error the library raises. Subclasses name the failure class
// so callers (and the CLI exit-code mapping) can tell them apart.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

// Point outside the Poincare ball, or an argument outside an operation's domain.
class DomainError : public Error {
public:
    using Error::Error;
};

class SingularityError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

class NormalizationUnderflow : public NumericError {
public:
    using NumericError::NumericError;
};

class ConditioningError : public NumericError {
public:
    using NumericError::NumericError;
};

class InputTooShort : public Error {
public:
    using Error::Error;
};

class InsufficientData : public Error {
public:
    using Error::Error;
};

class ResolutionError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace hyla
