#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace disco {

// Operand lengths that cannot be broadcast against each other.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A loss or objective produced a NaN or infinity.
class FiniteViolation : public std::runtime_error {
 public:
  FiniteViolation(std::string source, std::size_t index, double value);

  const std::string& source() const { return source_; }
  std::size_t index() const { return index_; }
  double value() const { return value_; }

 private:
  std::string source_;
  std::size_t index_;
  double value_;
};

// Raised when a batch-dependent loss is asked for a pointwise value.
class NotPointwise : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Training produced a non-finite loss, gradient or parameter.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t epoch, std::size_t step, const std::string& what);

  std::size_t epoch() const { return epoch_; }
  std::size_t step() const { return step_; }

 private:
  std::size_t epoch_;
  std::size_t step_;
};

// The chat provider could not produce a response.
class ProviderError : public std::runtime_error {
 public:
  ProviderError(const std::string& what, int last_status = 0,
                std::size_t retries = 0)
      : std::runtime_error(what), last_status_(last_status), retries_(retries) {}

  int last_status() const { return last_status_; }
  std::size_t retries() const { return retries_; }

 private:
  int last_status_;
  std::size_t retries_;
};

// A chat response did not contain a usable candidate object.
class ParseFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration document or command-line value.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace disco
