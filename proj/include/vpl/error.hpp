#pragma once

#include <stdexcept>
#include <string>

namespace vpl {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (files, matrices, scenario strings).
class ParseError : public Error {
public:
    using Error::Error;
};

/// A precondition or invariant of an operation does not hold.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A wire message does not follow the verification/detection protocol.
class ProtocolError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// The verification or detection service could not be reached, or kept
/// failing after the configured number of retries.
class BackendError : public Error {
public:
    using Error::Error;
};

}  // namespace vpl
