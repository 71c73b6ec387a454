#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fracvar {

/// Argument outside the mathematical domain of an operation (negative order,
/// window outside the interval, invalid set bounds, ...).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Sizes of grids, vectors or matrices do not agree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed expression text; `offset()` is the byte offset of the failure.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " at offset " + std::to_string(offset)), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Expression evaluation produced a non-finite value or hit an unbound variable.
class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The constraint map is not submersive at the candidate endpoints.
class RegularityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input files (problem JSON, trajectory CSV) that cannot be loaded.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fracvar
