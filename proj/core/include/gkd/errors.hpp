#pragma once

#include <stdexcept>
#include <string>

namespace gkd {

// Matrix/layer dimensions do not line up.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Caller violated a documented precondition (empty mask, bad fraction, ...).
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Input data failed validation (non-simplex row, label out of range, ...).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Non-finite values or a singular linear system.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input file; carries the file and 1-based line when known.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    ParseError(const std::string& path, std::size_t line, const std::string& what)
        : std::runtime_error(path + ":" + std::to_string(line) + ": " + what) {}
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Metric has no defined value on the given input (e.g., single-class AUC).
class UndefinedMetricError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace gkd
