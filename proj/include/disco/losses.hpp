#pragma once

// Offline preference-optimization objectives: the baselines (DPO, SLiC, exp,
// IPO, pairwise KTO) and the seven discovered losses, each available in the
// form the proposing model wrote it and in the beta-corrected form.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "disco/batch_math.hpp"

namespace disco {

enum class LossId {
  kDpo,
  kSlic,
  kExp,
  kIpo,
  kKtoPair,
  kDbaql,
  kAql,
  kPadll,
  kAqfl,
  kCell,
  kLrml,
  kPfl,
};

inline constexpr std::size_t kLossCount = 12;

// as_discovered reproduces the generated code literally; beta_corrected
// rescales rho by beta/tau inside intermediate calculations so that beta keeps
// its role as KL strength. The two coincide at beta == tau.
enum class Variant { kAsDiscovered, kBetaCorrected };

// Internal scaling constant of the discovered losses.
inline constexpr double kTau = 0.05;

struct LossParams {
  double beta = 0.05;
  Variant variant = Variant::kBetaCorrected;
};

struct LossConstant {
  std::string_view name;
  double value;
};

struct LossSpec {
  LossId id;
  std::string_view name;       // short id, e.g. "lrml"
  std::string_view full_name;  // e.g. "Log Ratio Modulated Loss"
  bool pointwise;              // f depends on rho alone (plus PFL's indicator)
  bool doubles_length;         // output has 2N entries
  std::span<const LossConstant> constants;

  double constant(std::string_view key) const;
};

const LossSpec& loss_spec(LossId id);
std::span<const LossSpec> all_loss_specs();
std::string_view loss_name(LossId id);
std::optional<LossId> loss_from_name(std::string_view name);
std::string_view variant_name(Variant v);
std::optional<Variant> variant_from_name(std::string_view name);

struct PreferenceBatch {
  BatchVector policy_chosen_logps;
  BatchVector policy_rejected_logps;
  BatchVector reference_chosen_logps;
  BatchVector reference_rejected_logps;

  std::size_t size() const { return policy_chosen_logps.size(); }

  // Throws ShapeError on unequal or zero lengths and FiniteViolation on
  // non-finite entries.
  void validate() const;
};

// rho_i = (pcl_i - prl_i) - (rcl_i - rrl_i)
BatchVector compute_rho(const PreferenceBatch& batch);

// Graph leaves an objective is built from. rho may be a leaf of its own
// (pointwise evaluation) or a node derived from the four log-prob leaves.
struct LossInputs {
  Expr rho;
  Expr pcl;
  Expr prl;
  Expr rcl;
  Expr rrl;
  Expr beta;
};

// Names of the graph leaves created by add_batch_inputs.
inline constexpr std::array<std::string_view, 5> kLeafNames = {
    "pcl", "prl", "rcl", "rrl", "beta"};

// Adds the four log-prob leaves and beta to the graph and derives rho.
LossInputs add_batch_inputs(CompGraph& graph, const PreferenceBatch& batch,
                            double beta);

Expr build_loss(LossId id, Variant variant, const LossInputs& in);

// Per-example losses: length N, or 2N for kto_pair. Throws FiniteViolation.
BatchVector eval_loss_batch(LossId id, const LossParams& params,
                            const PreferenceBatch& batch);

// Per-example policy log-probs; PFL's correctness split needs them.
struct PolicyLogps {
  double chosen;
  double rejected;
};

// f at a single rho. Throws NotPointwise for batch-dependent losses and
// std::invalid_argument for PFL without policy log-probs.
double eval_loss_pointwise(LossId id, double rho, const LossParams& params,
                           std::optional<PolicyLogps> policy = std::nullopt);

struct RhoDerivative {
  double value;
  // rho sits on a jump of the loss; value is then the right-limit derivative.
  bool at_discontinuity;
};

// df/drho by reverse-mode differentiation of the singleton graph.
RhoDerivative loss_gradient_rho(LossId id, double rho, const LossParams& params,
                                std::optional<PolicyLogps> policy = std::nullopt);

}  // namespace disco
