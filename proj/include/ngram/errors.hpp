#pragma once

#include <stdexcept>
#include <string>

namespace ngram {

/// Operand shapes do not agree.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A documented precondition was violated by the caller.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Input data is malformed or inconsistent (bad labels, unknown tokens, ...).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A value stopped being finite.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Configuration rejected before any work starts.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// File system or stream failure; the message carries the OS-level reason.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// VA-W span longer than the configured window.
class WindowError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

}  // namespace ngram
