#pragma once

// Tabular preference-alignment environment: a ground-truth reward table, a
// softmax reference policy, Bradley-Terry preference pairs and a trainer that
// fits a tabular policy to any catalog loss or DSL objective.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "disco/dsl.hpp"
#include "disco/losses.hpp"

namespace disco {

// Row-major contexts x completions matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data).subspan(r * cols, cols);
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

// Numerically stable log-softmax of one row.
std::vector<double> log_softmax(std::span<const double> logits);

struct SyntheticTask {
  std::size_t n_contexts = 0;
  std::size_t n_completions = 0;
  Matrix reward_table;      // r*(x, y)
  Matrix reference_logits;  // pi_ref = row softmax
  std::uint64_t seed = 0;
};

// Rewards ~ U[0, reward_scale), reference logits ~ N(0, 1), both row-major
// from their own generator streams.
SyntheticTask make_task(std::uint64_t seed, std::size_t n_contexts = 8,
                        std::size_t n_completions = 16, double reward_scale = 5.0);

struct PreferenceRecord {
  std::size_t context;
  std::size_t chosen;
  std::size_t rejected;
  bool first_won;  // the first sampled completion was preferred
};

struct PreferenceDataset {
  std::vector<PreferenceRecord> records;
  std::size_t n_train = 0;  // records[0, n_train) train, the rest heldout

  std::span<const PreferenceRecord> train() const {
    return std::span<const PreferenceRecord>(records).first(n_train);
  }
  std::span<const PreferenceRecord> heldout() const {
    return std::span<const PreferenceRecord>(records).subspan(n_train);
  }
};

// Contexts uniform, two distinct completions from pi_ref, winner drawn from
// the Bradley-Terry probability sigma(r1 - r2). The last floor(n/10) pairs
// are heldout.
PreferenceDataset sample_preference_dataset(const SyntheticTask& task,
                                            std::size_t n_pairs, std::uint64_t seed);

struct PolicyTable {
  Matrix logits;

  std::vector<double> log_probs(std::size_t context) const {
    return log_softmax(logits.row(context));
  }
};

PolicyTable reference_policy(const SyntheticTask& task);

PreferenceBatch batch_logps(const PolicyTable& policy, const PolicyTable& reference,
                            std::span<const PreferenceRecord> records);

// A catalog loss or a compiled DSL program.
struct Objective {
  std::variant<LossId, dsl::ObjectiveProgram> body;
  Variant variant = Variant::kBetaCorrected;
  std::string label;

  static Objective catalog(LossId id, Variant v = Variant::kBetaCorrected);
  static Objective program(dsl::ObjectiveProgram p, std::string label);
};

// Mean loss and its gradient with respect to the policy log-probs.
dsl::ProgramGradient objective_gradient(const Objective& objective,
                                        const PreferenceBatch& batch, double beta);

enum class OptimizerKind { kSgd, kAdam };

std::string_view optimizer_name(OptimizerKind k);
std::optional<OptimizerKind> optimizer_from_name(std::string_view name);

struct TrainConfig {
  double learning_rate = 0.05;
  std::size_t epochs = 200;
  std::size_t batch_size = 256;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double beta = 0.05;

  // Throws std::invalid_argument on non-positive rates or counts.
  void validate() const;
};

struct TrainTrace {
  std::vector<double> epoch_mean_loss;
};

struct TrainResult {
  PolicyTable policy;
  TrainTrace trace;
};

// Starts from the reference logits and minimizes the mean objective over
// shuffled minibatches of the train split. Throws DivergenceError on any
// non-finite loss, gradient or parameter.
TrainResult train_policy(const SyntheticTask& task, const PreferenceDataset& dataset,
                         const Objective& objective, const TrainConfig& cfg);

// Averages over contexts.
double expected_reward(const PolicyTable& policy, const SyntheticTask& task);
double kl_divergence(const PolicyTable& policy, const SyntheticTask& task);

// pi*(y|x) proportional to pi_ref(y|x) exp(r*(x,y) / beta); returned as
// normalized log-probabilities.
PolicyTable analytic_optimum(const SyntheticTask& task, double beta);

// Exact expected ground-truth reward of the trained policy.
double fitness(const SyntheticTask& task, const PolicyTable& policy);

struct FrontierPoint {
  double beta;
  std::uint64_t seed;
  std::optional<double> expected_reward;  // empty when diverged
  std::optional<double> kl_divergence;
  bool diverged = false;
  std::string error;
};

// One training run per (beta, seed) cell, each on a dataset sampled with that
// seed. Cells run on up to `threads` workers (0 = hardware concurrency); rows
// come back beta-major then seed regardless of completion order.
std::vector<FrontierPoint> frontier_sweep(const SyntheticTask& task,
                                          const Objective& objective,
                                          std::span<const double> betas,
                                          std::span<const std::uint64_t> seeds,
                                          const TrainConfig& cfg, std::size_t n_pairs,
                                          std::size_t threads = 0);

std::string frontier_csv(const Objective& objective,
                         std::span<const FrontierPoint> points);
std::string trace_csv(const TrainTrace& trace);

}  // namespace disco
