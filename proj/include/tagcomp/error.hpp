#pragma once

#include <stdexcept>
#include <string>

namespace tagcomp {

// Base for every error raised by the library. The C API maps each subclass to
// a status code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

// Malformed input file; the message carries "path:line:" when known.
class ParseError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Non-finite objective or parameters during optimization.
class DivergenceError : public Error {
public:
    using Error::Error;
};

}  // namespace tagcomp
