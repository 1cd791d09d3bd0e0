#pragma once

#include <stdexcept>
#include <string>

namespace mosfad {

// Bad input: malformed files, out-of-range values, dimension mismatches,
// invalid configuration. The CLI maps these to exit code 2.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// File system failures (open, read, write).
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Numerical failure during optimisation (non-finite loss and the like).
class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace mosfad
