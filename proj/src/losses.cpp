#include "disco/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace disco {

namespace {

constexpr LossConstant kDbaqlConstants[] = {
    {"tau", kTau},
    {"starting_quantile", 0.5},
    {"quantile_adapt_rate", 0.01},
    {"temperature", 0.9},
    {"dynamic_blend_rate", 1.0},
};
constexpr LossConstant kAqlConstants[] = {
    {"tau", kTau},
    {"percentile", 0.5},
    {"moving_quantile_weight", 0.01},
};
constexpr LossConstant kPadllConstants[] = {
    {"base_decay", 0.9},
    {"mismatch_penalty", 0.5},
};
constexpr LossConstant kAqflConstants[] = {
    {"tau", kTau},
    {"quantile_update_rate", 0.05},
    {"distance_scale", 0.1},
};
constexpr LossConstant kCellConstants[] = {{"alpha", 0.5}};
constexpr LossConstant kLrmlConstants[] = {{"tau", kTau}};
constexpr LossConstant kPflConstants[] = {{"tau", kTau}, {"focus_scale", 2.0}};

constexpr std::span<const LossConstant> kEmpty{};

const LossSpec kSpecs[] = {
    {LossId::kDpo, "dpo", "Direct Preference Optimization", true, false, kEmpty},
    {LossId::kSlic, "slic", "Sequence Likelihood Calibration", true, false, kEmpty},
    {LossId::kExp, "exp", "Exponential Loss", true, false, kEmpty},
    {LossId::kIpo, "ipo", "Identity Preference Optimization", true, false, kEmpty},
    {LossId::kKtoPair, "kto_pair", "Pairwise Kahneman-Tversky Optimization", false,
     true, kEmpty},
    {LossId::kDbaql, "dbaql", "Dynamic Blended Adaptive Quantile Loss", false, false,
     kDbaqlConstants},
    {LossId::kAql, "aql", "Adaptive Quantile Loss", false, false, kAqlConstants},
    {LossId::kPadll, "padll", "Performance Adaptive Decay Logistic Loss", true, false,
     kPadllConstants},
    {LossId::kAqfl, "aqfl", "Adaptive Quantile Feedback Loss", false, false,
     kAqflConstants},
    {LossId::kCell, "cell", "Combined Exponential + Logistic Loss", true, false,
     kCellConstants},
    {LossId::kLrml, "lrml", "Log Ratio Modulated Loss", true, false, kLrmlConstants},
    {LossId::kPfl, "pfl", "Policy Focused Loss", true, false, kPflConstants},
};

static_assert(std::size(kSpecs) == kLossCount);

bool corrected(Variant v) { return v == Variant::kBetaCorrected; }

// rho as it enters the intermediate statistics: raw logits when as
// discovered, beta * rho / tau when corrected.
Expr scaled_logits(const LossInputs& in, Variant v) {
  return corrected(v) ? in.beta * in.rho / kTau : in.rho;
}

Expr dbaql(const LossInputs& in, Variant v) {
  const double temperature = 0.9;
  const double dynamic_blend_rate = 1.0;
  const Expr z = scaled_logits(in, v);
  const Expr blend = sigmoid(var(z)) * dynamic_blend_rate;
  const Expr logistic = -logsigmoid(in.beta * in.rho / temperature);
  const Expr expl = exp(-in.beta * in.rho * temperature);
  return blend * logistic + (1.0 - blend) * expl;
}

Expr aql(const LossInputs& in, Variant v) {
  const double percentile = 0.5;
  const double weight = 0.01;
  const Expr z = scaled_logits(in, v);
  const Expr moving_quantile = percentile + weight * (sigmoid(mean(z)) - percentile);
  // q = sigma(-beta * (rho - m)) as written; sigma(tau * m - beta * rho) corrected.
  const Expr q = corrected(v)
                     ? sigmoid(kTau * moving_quantile - in.beta * in.rho)
                     : sigmoid(-in.beta * (in.rho - moving_quantile));
  const Expr logistic = -logsigmoid(in.beta * in.rho);
  const Expr hinge = relu(1.0 - in.beta * in.rho);
  return q * logistic + (1.0 - q) * hinge;
}

Expr aqfl(const LossInputs& in, Variant v) {
  const double update_rate = 0.05;
  const double distance_scale = 0.1;
  const Expr z = scaled_logits(in, v);
  const Expr m1 = stddev(z) * mean(sigmoid(-z));
  const Expr m2 = m1 + update_rate * (sigmoid(mean(z)) - m1);
  const Expr distance = abs(z - m2);
  const Expr r = sigmoid(distance_scale * distance);
  const Expr logistic = -logsigmoid(in.beta * in.rho);
  const Expr hinge = relu(1.0 - in.beta * in.rho);
  return r * logistic + (1.0 - r) * hinge;
}

Expr pfl(const LossInputs& in, Variant v) {
  const double focus_scale = 2.0;
  const Expr z = scaled_logits(in, v);
  const Expr is_correct = indicator_gt(in.pcl, in.prl);
  return where(is_correct, -logsigmoid(z) / focus_scale, relu(1.0 - z) * focus_scale);
}

}  // namespace

double LossSpec::constant(std::string_view key) const {
  for (const auto& c : constants) {
    if (c.name == key) return c.value;
  }
  throw std::out_of_range(std::string(name) + " has no constant " + std::string(key));
}

const LossSpec& loss_spec(LossId id) { return kSpecs[static_cast<std::size_t>(id)]; }
std::span<const LossSpec> all_loss_specs() { return kSpecs; }
std::string_view loss_name(LossId id) { return loss_spec(id).name; }

std::optional<LossId> loss_from_name(std::string_view name) {
  for (const auto& s : kSpecs) {
    if (s.name == name) return s.id;
  }
  return std::nullopt;
}

std::string_view variant_name(Variant v) {
  return corrected(v) ? "beta_corrected" : "as_discovered";
}

std::optional<Variant> variant_from_name(std::string_view name) {
  if (name == "beta_corrected") return Variant::kBetaCorrected;
  if (name == "as_discovered") return Variant::kAsDiscovered;
  return std::nullopt;
}

void PreferenceBatch::validate() const {
  const std::size_t n = policy_chosen_logps.size();
  if (n == 0) throw ShapeError("preference batch is empty");
  if (policy_rejected_logps.size() != n || reference_chosen_logps.size() != n ||
      reference_rejected_logps.size() != n) {
    throw ShapeError("preference batch vectors have unequal lengths");
  }
  const std::pair<const char*, const BatchVector*> fields[] = {
      {"policy_chosen_logps", &policy_chosen_logps},
      {"policy_rejected_logps", &policy_rejected_logps},
      {"reference_chosen_logps", &reference_chosen_logps},
      {"reference_rejected_logps", &reference_rejected_logps},
  };
  for (const auto& [label, vec] : fields) {
    if (auto bad = vec->first_non_finite()) {
      throw FiniteViolation(label, *bad, (*vec)[*bad]);
    }
  }
}

BatchVector compute_rho(const PreferenceBatch& batch) {
  batch.validate();
  std::vector<double> rho(batch.size());
  for (std::size_t i = 0; i < rho.size(); ++i) {
    rho[i] = (batch.policy_chosen_logps[i] - batch.policy_rejected_logps[i]) -
             (batch.reference_chosen_logps[i] - batch.reference_rejected_logps[i]);
  }
  return BatchVector(std::move(rho));
}

LossInputs add_batch_inputs(CompGraph& graph, const PreferenceBatch& batch,
                            double beta) {
  batch.validate();
  Expr pcl(graph, graph.input("pcl", batch.policy_chosen_logps));
  Expr prl(graph, graph.input("prl", batch.policy_rejected_logps));
  Expr rcl(graph, graph.input("rcl", batch.reference_chosen_logps));
  Expr rrl(graph, graph.input("rrl", batch.reference_rejected_logps));
  Expr b(graph, graph.input("beta", beta));
  Expr rho = (pcl - prl) - (rcl - rrl);
  return {rho, pcl, prl, rcl, rrl, b};
}

Expr build_loss(LossId id, Variant variant, const LossInputs& in) {
  switch (id) {
    case LossId::kDpo:
      return -logsigmoid(in.beta * in.rho);
    case LossId::kSlic:
      return relu(1.0 - in.beta * in.rho);
    case LossId::kExp:
      return exp(-in.beta * in.rho);
    case LossId::kIpo:
      return pow(in.rho - 1.0 / (2.0 * in.beta), 2.0);
    case LossId::kKtoPair: {
      // The KL term for chosen (rejected) is estimated from the rejected
      // (chosen) half.
      const Expr chosen_logratios = in.pcl - in.rcl;
      const Expr rejected_logratios = in.prl - in.rrl;
      const Expr chosen_kl = clamp_min(mean(chosen_logratios), 0.0);
      const Expr rejected_kl = clamp_min(mean(rejected_logratios), 0.0);
      return concat(1.0 - sigmoid(in.beta * (chosen_logratios - rejected_kl)),
                    1.0 - sigmoid(in.beta * (chosen_kl - rejected_logratios)));
    }
    case LossId::kDbaql:
      return dbaql(in, variant);
    case LossId::kAql:
      return aql(in, variant);
    case LossId::kPadll: {
      const double base_decay = 0.9;
      const double mismatch_penalty = 0.5;
      const Expr mismatches = indicator_lt(in.rho, in.rho.constant(0.0));
      const Expr adaptive_decay = base_decay * (1.0 - mismatches * mismatch_penalty);
      return adaptive_decay * -logsigmoid(in.beta * in.rho);
    }
    case LossId::kAqfl:
      return aqfl(in, variant);
    case LossId::kCell: {
      const double alpha = 0.5;
      const Expr exp_losses = exp(-in.beta * in.rho);
      const Expr log_losses = -logsigmoid(in.beta * in.rho);
      return alpha * exp_losses + (1.0 - alpha) * log_losses;
    }
    case LossId::kLrml: {
      const Expr modulation = sigmoid(scaled_logits(in, variant));
      const Expr logistic = -logsigmoid(in.beta * in.rho);
      const Expr exp_component = exp(-in.beta * in.rho);
      return logistic * (1.0 - modulation) + exp_component * modulation;
    }
    case LossId::kPfl:
      return pfl(in, variant);
  }
  throw std::logic_error("unknown loss id");
}

namespace {

BatchVector checked(const Value& v, LossId id) {
  BatchVector out = is_scalar(v) ? BatchVector{std::get<double>(v)}
                                 : std::get<BatchVector>(v);
  if (auto bad = out.first_non_finite()) {
    throw FiniteViolation(std::string(loss_name(id)), *bad, out[*bad]);
  }
  return out;
}

void check_beta(double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw std::invalid_argument("beta must be a positive finite number");
  }
}

// Singleton graph with rho as its own leaf.
void build_pointwise(CompGraph& graph, LossId id, double rho,
                     const LossParams& params, std::optional<PolicyLogps> policy,
                     std::optional<Expr>& loss) {
  const LossSpec& spec = loss_spec(id);
  if (!spec.pointwise) {
    throw NotPointwise(std::string(spec.name) + " depends on batch statistics");
  }
  check_beta(params.beta);
  if (id == LossId::kPfl && !policy) {
    throw std::invalid_argument("pfl needs the policy chosen/rejected log-probs");
  }
  const PolicyLogps p = policy.value_or(PolicyLogps{0.0, 0.0});
  Expr r(graph, graph.input("rho", BatchVector{rho}));
  Expr pcl(graph, graph.input("pcl", BatchVector{p.chosen}));
  Expr prl(graph, graph.input("prl", BatchVector{p.rejected}));
  Expr zero(graph, graph.constant(0.0));
  Expr b(graph, graph.input("beta", params.beta));
  loss = build_loss(id, params.variant, LossInputs{r, pcl, prl, zero, zero, b});
}

}  // namespace

BatchVector eval_loss_batch(LossId id, const LossParams& params,
                            const PreferenceBatch& batch) {
  check_beta(params.beta);
  CompGraph graph;
  const LossInputs in = add_batch_inputs(graph, batch, params.beta);
  return checked(build_loss(id, params.variant, in).value(), id);
}

double eval_loss_pointwise(LossId id, double rho, const LossParams& params,
                           std::optional<PolicyLogps> policy) {
  CompGraph graph;
  std::optional<Expr> loss;
  build_pointwise(graph, id, rho, params, policy, loss);
  return checked(loss->value(), id)[0];
}

RhoDerivative loss_gradient_rho(LossId id, double rho, const LossParams& params,
                                std::optional<PolicyLogps> policy) {
  CompGraph graph;
  std::optional<Expr> loss;
  build_pointwise(graph, id, rho, params, policy, loss);
  const std::string wrt[] = {"rho"};
  const double d = graph.gradient(loss->id(), wrt).at("rho")[0];
  bool jump = false;
  if (id == LossId::kPadll) jump = rho == 0.0;
  if (id == LossId::kPfl) jump = policy->chosen == policy->rejected;
  return {d, jump};
}

}  // namespace disco
