#pragma once

#include <stdexcept>
#include <string>

namespace vdn {

// Exit-code families used by the CLI: data errors map to 2, numeric to 3.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class CheckpointError : public DataError {
public:
    using DataError::DataError;
};

class NumericError : public Error {
public:
    using Error::Error;
};

class DegenerateError : public NumericError {
public:
    using NumericError::NumericError;
};

}  // namespace vdn
