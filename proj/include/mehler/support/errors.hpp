#pragma once

#include <stdexcept>
#include <string>

namespace mehler {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Rejected input: out-of-range parameter, malformed matrix, bad config value.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// The requested evaluation path does not exist for this family/function.
class MethodUnavailable : public Error {
public:
    using Error::Error;
};

/// A numerical procedure did not reach its tolerance.
class NumericalFailure : public Error {
public:
    using Error::Error;
};

inline void require(bool condition, const std::string& message) {
    if (!condition) throw InvalidArgument(message);
}

}  // namespace mehler
