#pragma once

// Chat context construction for the discovery loop.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace disco {

struct ChatMessage {
  std::string role;  // "system", "user" or "assistant"
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

// kReplay shows the reference python listings; kDsl shows DSL sources and
// appends the language reference to the system prompt.
enum class PromptMode { kDsl, kReplay };

std::string_view prompt_mode_name(PromptMode mode);
std::optional<PromptMode> prompt_mode_from_name(std::string_view name);

struct BurnInEntry {
  std::string name;
  std::string code;
  double fitness;
};

// The four reference listings with their published fitnesses.
std::vector<BurnInEntry> replay_burn_in();

// Grammar and builtin summary shown to the proposer in DSL mode.
std::string dsl_reference();

std::string system_prompt(PromptMode mode);

// Lists the entries with their fitness, ending in the request for the next
// candidate.
std::string burn_in_user_message(std::span<const BurnInEntry> entries);

// [system, user]. Throws std::invalid_argument when entries is empty.
std::vector<ChatMessage> build_burn_in_context(std::span<const BurnInEntry> entries,
                                               PromptMode mode);

// "Fitness: {val}.\nPlease generate the next one." with shortest round-trip
// formatting of val.
ChatMessage feedback_message(double fitness);

// "Code not valid. Error:\n{error}\nPlease generate the next one."
ChatMessage feedback_message(std::string_view error);

}  // namespace disco
