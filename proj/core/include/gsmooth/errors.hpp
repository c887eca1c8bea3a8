#pragma once

#include <stdexcept>
#include <string>

namespace gsmooth {

/// Malformed or out-of-range caller input: bad shapes, node ids, file lines.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A documented precondition of an operation does not hold.
class PreconditionError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Non-finite values or a singular system encountered during computation.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace gsmooth
