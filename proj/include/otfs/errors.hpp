#pragma once

#include <stdexcept>
#include <string>

namespace otfs {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid arguments, inputs, or files. The CLI maps these to exit code 3.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// The iteration broke down numerically. The CLI maps these to exit code 2.
class NumericalError : public Error {
public:
    using Error::Error;
};

class DomainError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class DimensionError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class AllBlackImage : public ValidationError {
public:
    AllBlackImage() : ValidationError("image has zero total gray level") {}
};

class EmptySample : public ValidationError {
public:
    EmptySample() : ValidationError("sample is empty") {}
};

class SizeCapExceeded : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class GeometryError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class GeometryViolation : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class UnsupportedOrder : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class PlanMismatch : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class IoError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class NumericalUnderflow : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class NonPositiveDenominator : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace otfs
