#pragma once

#include <stdexcept>
#include <string>

namespace inmt {

// Invalid hyperparameter, dimension or configuration key.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An operation received an empty corpus, sentence or batch.
class EmptyInputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class OutOfRangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Arrays or checkpoints whose shapes/names do not line up.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// API misuse, e.g. calling backward without a forward cache.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class SessionClosedError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Malformed files: checkpoints, vocabularies, merges, dictionaries.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace inmt
