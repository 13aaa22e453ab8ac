#pragma once

#include <stdexcept>
#include <string>

namespace adbs {

// Base of every error raised by the library. The CLI maps any of these to a
// nonzero exit status and prints what() to stderr.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Vector or matrix dimensions disagree.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Malformed or non-finite input data, including CSV parse failures.
class DataError : public Error {
public:
    using Error::Error;
};

// Input is well-formed but degenerate (zero vector, non-unit prototype).
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

// Wrong number of items (empty sample set, K < 1, too few classes).
class ArityError : public Error {
public:
    using Error::Error;
};

// Class index out of range.
class IndexError : public Error {
public:
    using Error::Error;
};

// Session ordering or label-space contract violated.
class ProtocolError : public Error {
public:
    using Error::Error;
};

// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
    using Error::Error;
};

// Bad configuration file or key.
class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace adbs
