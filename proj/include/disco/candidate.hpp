#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "disco/losses.hpp"

namespace disco {

struct Candidate {
  std::string thought;
  std::string name;
  std::string code;
};

// Takes the first balanced JSON object in the response that parses, after
// escaping raw control characters inside its strings, and reads its
// "thought", "name" and "code" strings. Surrounding prose and code fences are
// ignored. Throws ParseFailure.
Candidate parse_candidate(std::string_view response);

// Seeded random log-probabilities in [-10, -0.1].
PreferenceBatch probe_batch(std::size_t n, std::uint64_t seed);

// Parse, check, evaluate and differentiate on a probe batch of n_probe
// examples. Returns the first failure's message, or nullopt when the source
// is usable for training.
std::optional<std::string> validate_candidate(std::string_view source,
                                              std::size_t n_probe, std::uint64_t seed,
                                              double beta = 0.05);

}  // namespace disco
