#pragma once

#include <stdexcept>
#include <string>

namespace sern {

/// Base class for all errors raised by the library.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Tensor/operation dimension mismatch.
struct ShapeError : Error {
    explicit ShapeError(const std::string& what) : Error(what) {}
};

/// Violated operation precondition (non-scalar loss, bad config, ...).
struct ContractError : Error {
    explicit ContractError(const std::string& what) : Error(what) {}
};

/// File parsing / serialization failure.
struct IoError : Error {
    explicit IoError(const std::string& what) : Error(what) {}
};

/// Training loss became non-finite.
struct DivergenceError : Error {
    explicit DivergenceError(const std::string& what) : Error(what) {}
};

}  // namespace sern
