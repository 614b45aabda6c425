#pragma once

#include <stdexcept>
#include <string>

namespace ddci {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Mismatched or invalid dimensions.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Rejected argument values (bad acceleration, empty dataset, ...).
class ParamError : public Error {
public:
    using Error::Error;
};

// Malformed, truncated, or incompatible files.
class FormatError : public Error {
public:
    using Error::Error;
};

// Metric preconditions violated (zero-norm reference, degenerate test).
class MetricError : public Error {
public:
    using Error::Error;
};

}  // namespace ddci
