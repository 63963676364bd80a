#pragma once

#include <stdexcept>
#include <string>

namespace pin {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Violated precondition (caller bug): shape mismatch, out-of-range index, ...
struct ContractError : Error {
    using Error::Error;
};

/// Numerically invalid input (non-finite value, non-positive prediction, ...).
struct DomainError : Error {
    using Error::Error;
};

/// Malformed input data (CSV rows, schema files).
struct IngestError : Error {
    using Error::Error;
};

/// Model or config file cannot be read back.
struct LoadError : Error {
    using Error::Error;
};

/// Training diverged or cannot proceed.
struct TrainError : Error {
    using Error::Error;
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ContractError(msg);
}

} // namespace detail
} // namespace pin
