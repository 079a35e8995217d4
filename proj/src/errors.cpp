#include "disco/errors.hpp"

#include "disco/text_format.hpp"

namespace disco {

FiniteViolation::FiniteViolation(std::string source, std::size_t index,
                                 double value)
    : std::runtime_error("non-finite value " + format_double(value) +
                         " at element " + std::to_string(index) + " of " +
                         source),
      source_(std::move(source)),
      index_(index),
      value_(value) {}

DivergenceError::DivergenceError(std::size_t epoch, std::size_t step,
                                 const std::string& what)
    : std::runtime_error("training diverged at epoch " + std::to_string(epoch) +
                         ", step " + std::to_string(step) + ": " + what),
      epoch_(epoch),
      step_(step) {}

}  // namespace disco
