#pragma once

// One flat JSON document holding every knob of a run. Keys absent from a
// document keep their defaults; unknown keys are rejected.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "disco/chat_provider.hpp"
#include "disco/discovery.hpp"
#include "disco/losses.hpp"
#include "disco/preference_sim.hpp"

namespace disco {

struct RunConfig {
  std::uint64_t seed = 0;
  std::string out = "run";

  // task
  std::uint64_t task_seed = 0;
  std::size_t n_contexts = 8;
  std::size_t n_completions = 16;
  double reward_scale = 5.0;
  std::size_t pairs = 4096;

  // objective and training
  std::string loss = "dpo";
  std::string variant = "beta_corrected";
  double beta = 0.05;
  std::vector<double> betas = {0.025, 0.05, 0.1, 0.25, 0.5, 1.0};
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  double learning_rate = 0.05;
  std::size_t epochs = 200;
  std::size_t batch_size = 256;
  std::string optimizer = "adam";
  std::size_t threads = 0;

  // discovery
  std::size_t max_generations = 10;
  std::size_t max_resamples = 3;
  std::size_t early_stop_patience = 0;
  std::string prompt_mode = "dsl";
  std::string context_order = "chronological";
  std::size_t top_k = 8;
  std::vector<std::string> burn_in = {"dpo", "slic", "ipo", "kto_pair"};

  // provider
  std::string provider = "mock";
  std::string script;
  std::string endpoint = "http://127.0.0.1:8000/v1";
  std::string model = "gpt-4";
  std::optional<double> temperature;
  double timeout_seconds = 120.0;
  std::size_t max_retries = 5;
  double backoff_seconds = 1.0;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// Overlays the keys present in `json_text` onto `base`. Throws ConfigError
// naming the first unknown or mistyped key.
RunConfig merge_config(const RunConfig& base, std::string_view json_text);

// Defaults overlaid with the file. Throws ConfigError.
RunConfig load_config(const std::string& path);

// Every key, in declaration order, pretty-printed.
std::string config_to_json(const RunConfig& cfg);

// Throws ConfigError on names that do not resolve.
LossId config_loss(const RunConfig& cfg);
Variant config_variant(const RunConfig& cfg);
TrainConfig to_train_config(const RunConfig& cfg);
DiscoveryConfig to_discovery_config(const RunConfig& cfg);
HttpSettings to_http_settings(const RunConfig& cfg);

}  // namespace disco
