#pragma once

#include <stdexcept>
#include <string>

namespace ckg {

// Malformed input files (bad column counts, bad binary headers).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Well-formed but unusable data: empty datasets, misaligned feature rows,
// non-finite values.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller violated an operation's precondition (shape mismatch, bad id).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Non-finite values produced during computation.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unknown configuration keys or unparsable configuration values.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ckg
