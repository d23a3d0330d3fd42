#pragma once

#include <stdexcept>
#include <string>

namespace acerl {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad shapes, out-of-range parameters, invalid configurations.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// File could not be opened, read or written.
class IoError : public Error {
public:
    using Error::Error;
};

/// A persisted document is malformed or carries an unsupported version.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// Divergence, non-finite values, degenerate models.
class NumericalError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw InvalidArgument(msg);
}

} // namespace detail

} // namespace acerl
