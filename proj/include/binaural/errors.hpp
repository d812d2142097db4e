#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace binaural {

// Invalid arguments and violated preconditions are reported with
// std::invalid_argument. The types below cover the remaining failure classes.

/// A recursion or factorization hit a degenerate numeric state (reflection
/// coefficient on the unit circle, vanishing innovation variance, ...).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed binary or text input. `offset()` is the byte position where
/// parsing stopped.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// A metric is not defined for the given input (e.g. a silent channel).
class UndefinedMetric : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace binaural
