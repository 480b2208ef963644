#pragma once

#include <stdexcept>
#include <string>

namespace streamx {

/// Raised when a non-finite value appears in parameters, traces, scalers or
/// the TD error. Runs catch it and mark themselves diverged.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shape or configuration mismatch between collaborating objects.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline void require_dims(std::size_t got, std::size_t want, const char* what) {
    if (got != want) {
        throw DimensionError(std::string(what) + ": expected length " + std::to_string(want) + ", got " +
                             std::to_string(got));
    }
}

}  // namespace streamx
