#pragma once

// The propose / validate / train / feed back loop.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "disco/archive.hpp"
#include "disco/chat_provider.hpp"
#include "disco/losses.hpp"
#include "disco/preference_sim.hpp"
#include "disco/prompts.hpp"

namespace disco {

// kTopKSorted rebuilds the context before every query from the best top_k
// evaluated objectives in ascending fitness order; kChronological keeps one
// growing conversation.
enum class ContextOrder { kChronological, kTopKSorted };

std::string_view context_order_name(ContextOrder o);
std::optional<ContextOrder> context_order_from_name(std::string_view name);

struct TaskSettings {
  std::uint64_t seed = 0;
  std::size_t n_contexts = 8;
  std::size_t n_completions = 16;
  double reward_scale = 5.0;
  std::size_t n_pairs = 4096;
};

struct DiscoveryConfig {
  std::size_t max_generations = 10;
  std::size_t max_resamples = 3;        // extra attempts after a failed candidate
  std::size_t early_stop_patience = 0;  // 0 disables early stopping
  PromptMode mode = PromptMode::kDsl;
  ContextOrder context_order = ContextOrder::kChronological;
  std::size_t top_k = 8;
  std::vector<LossId> burn_in = {LossId::kDpo, LossId::kSlic, LossId::kIpo,
                                 LossId::kKtoPair};
  TaskSettings task;
  TrainConfig train;
  std::uint64_t seed = 0;  // dataset, shuffling and probe batches
  std::optional<std::string> archive_path;

  // Throws ConfigError.
  void validate() const;
};

struct DiscoveryResult {
  Archive archive;
  std::vector<ChatMessage> transcript;  // the full chronological conversation
};

// Burn-in entries with fitness measured by training each listed loss (DSL
// mode) or the reference listings (replay mode).
std::vector<BurnInEntry> measure_burn_in(const DiscoveryConfig& cfg,
                                         const SyntheticTask& task,
                                         const PreferenceDataset& dataset);

// Throws ProviderError; records evaluated so far stay in the archive file.
DiscoveryResult run_discovery(ChatProvider& provider, const DiscoveryConfig& cfg);

struct ReplayReport {
  std::vector<std::string> names;  // parsed from the responses, in order
  std::size_t feedback_checked = 0;
  std::vector<std::string> mismatches;

  bool ok() const { return mismatches.empty(); }
};

// Checks a recorded transcript. Each JSONL line is either
// {"role":"assistant","name":...,"response":...} or
// {"role":"user","expected":..., "fitness":x | "error":text}: responses must
// parse to the recorded name and feedback_message must reproduce the
// expected text byte for byte.
ReplayReport replay_transcript(const std::string& path);

}  // namespace disco
