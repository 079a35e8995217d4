#include "disco/preference_sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "disco/rng.hpp"
#include "disco/text_format.hpp"

namespace disco {

namespace {

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void check_same_shape(const PolicyTable& policy, const SyntheticTask& task) {
  if (policy.logits.rows != task.n_contexts || policy.logits.cols != task.n_completions) {
    throw ShapeError("policy shape does not match the task");
  }
}

std::vector<double> probs_of(std::span<const double> logits) {
  std::vector<double> p = log_softmax(logits);
  for (double& v : p) v = std::exp(v);
  return p;
}

std::size_t sample_categorical(CounterRng& rng, std::span<const double> probs) {
  const double u = rng.uniform();
  double cum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    cum += probs[i];
    if (u < cum) return i;
  }
  return probs.size() - 1;
}

class Adam {
 public:
  explicit Adam(std::size_t n) : m_(n, 0.0), v_(n, 0.0) {}

  void step(std::vector<double>& params, const std::vector<double>& grad, double lr) {
    constexpr double b1 = 0.9;
    constexpr double b2 = 0.999;
    constexpr double eps = 1e-8;
    ++t_;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = b1 * m_[i] + (1.0 - b1) * grad[i];
      v_[i] = b2 * v_[i] + (1.0 - b2) * grad[i] * grad[i];
      const double mhat = m_[i] / c1;
      const double vhat = v_[i] / c2;
      params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }

 private:
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t t_ = 0;
};

}  // namespace

std::vector<double> log_softmax(std::span<const double> logits) {
  if (logits.empty()) return {};
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - mx);
  const double lse = mx + std::log(sum);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

SyntheticTask make_task(std::uint64_t seed, std::size_t n_contexts,
                        std::size_t n_completions, double reward_scale) {
  if (n_contexts < 2 || n_completions < 2) {
    throw std::invalid_argument("a task needs at least 2 contexts and 2 completions");
  }
  if (!(reward_scale >= 0.0) || !std::isfinite(reward_scale)) {
    throw std::invalid_argument("reward_scale must be finite and non-negative");
  }
  SyntheticTask task;
  task.n_contexts = n_contexts;
  task.n_completions = n_completions;
  task.seed = seed;
  task.reward_table = Matrix(n_contexts, n_completions);
  task.reference_logits = Matrix(n_contexts, n_completions);
  CounterRng rewards(seed, RngStream::kRewardTable);
  for (double& r : task.reward_table.data) r = reward_scale * rewards.uniform();
  CounterRng logits(seed, RngStream::kReferenceLogits);
  for (double& l : task.reference_logits.data) l = logits.normal();
  return task;
}

PreferenceDataset sample_preference_dataset(const SyntheticTask& task,
                                            std::size_t n_pairs, std::uint64_t seed) {
  if (n_pairs == 0) throw std::invalid_argument("n_pairs must be at least 1");
  std::vector<std::vector<double>> ref_probs;
  for (std::size_t x = 0; x < task.n_contexts; ++x) {
    ref_probs.push_back(probs_of(task.reference_logits.row(x)));
  }
  CounterRng rng(seed, RngStream::kDataset);
  PreferenceDataset ds;
  ds.records.reserve(n_pairs);
  for (std::size_t k = 0; k < n_pairs; ++k) {
    const std::size_t x = rng.index(task.n_contexts);
    const std::size_t y1 = sample_categorical(rng, ref_probs[x]);
    std::size_t y2 = sample_categorical(rng, ref_probs[x]);
    while (y2 == y1) y2 = sample_categorical(rng, ref_probs[x]);
    const double p_first =
        sigmoid(task.reward_table(x, y1) - task.reward_table(x, y2));
    const bool first = rng.uniform() < p_first;
    ds.records.push_back({x, first ? y1 : y2, first ? y2 : y1, first});
  }
  ds.n_train = n_pairs - n_pairs / 10;
  return ds;
}

PolicyTable reference_policy(const SyntheticTask& task) {
  return PolicyTable{task.reference_logits};
}

PreferenceBatch batch_logps(const PolicyTable& policy, const PolicyTable& reference,
                            std::span<const PreferenceRecord> records) {
  if (policy.logits.rows != reference.logits.rows ||
      policy.logits.cols != reference.logits.cols) {
    throw ShapeError("policy and reference shapes differ");
  }
  const std::size_t n = records.size();
  std::vector<double> pcl(n), prl(n), rcl(n), rrl(n);
  std::vector<std::vector<double>> pol_cache(policy.logits.rows);
  std::vector<std::vector<double>> ref_cache(policy.logits.rows);
  for (std::size_t i = 0; i < n; ++i) {
    const PreferenceRecord& r = records[i];
    if (r.context >= policy.logits.rows || r.chosen >= policy.logits.cols ||
        r.rejected >= policy.logits.cols) {
      throw std::out_of_range("preference record index out of range");
    }
    auto& lp = pol_cache[r.context];
    auto& lr = ref_cache[r.context];
    if (lp.empty()) lp = policy.log_probs(r.context);
    if (lr.empty()) lr = reference.log_probs(r.context);
    pcl[i] = lp[r.chosen];
    prl[i] = lp[r.rejected];
    rcl[i] = lr[r.chosen];
    rrl[i] = lr[r.rejected];
  }
  return {BatchVector(std::move(pcl)), BatchVector(std::move(prl)),
          BatchVector(std::move(rcl)), BatchVector(std::move(rrl))};
}

Objective Objective::catalog(LossId id, Variant v) {
  return Objective{id, v, std::string(loss_name(id))};
}

Objective Objective::program(dsl::ObjectiveProgram p, std::string label) {
  return Objective{std::move(p), Variant::kBetaCorrected, std::move(label)};
}

dsl::ProgramGradient objective_gradient(const Objective& objective,
                                        const PreferenceBatch& batch, double beta) {
  if (const auto* program = std::get_if<dsl::ObjectiveProgram>(&objective.body)) {
    return dsl::grad_program(*program, batch, beta);
  }
  const LossId id = std::get<LossId>(objective.body);
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw std::invalid_argument("beta must be a positive finite number");
  }
  CompGraph graph;
  const LossInputs in = add_batch_inputs(graph, batch, beta);
  const Expr losses = build_loss(id, objective.variant, in);
  BatchVector values = std::get<BatchVector>(losses.value());
  if (auto bad = values.first_non_finite()) {
    throw FiniteViolation(std::string(loss_name(id)), *bad, values[*bad]);
  }
  const Expr total = mean(losses);
  const std::string wrt[] = {"pcl", "prl"};
  auto grads = graph.gradient(total.id(), wrt);
  dsl::ProgramGradient out{std::move(values), std::get<double>(total.value()),
                           std::move(grads.at("pcl")), std::move(grads.at("prl"))};
  for (const BatchVector* g : {&out.d_policy_chosen, &out.d_policy_rejected}) {
    if (auto bad = g->first_non_finite()) {
      throw FiniteViolation(std::string(loss_name(id)) + " gradient", *bad, (*g)[*bad]);
    }
  }
  return out;
}

std::string_view optimizer_name(OptimizerKind k) {
  return k == OptimizerKind::kSgd ? "sgd" : "adam";
}

std::optional<OptimizerKind> optimizer_from_name(std::string_view name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "adam") return OptimizerKind::kAdam;
  return std::nullopt;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("learning_rate must be positive");
  }
  if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw std::invalid_argument("beta must be positive");
  }
}

TrainResult train_policy(const SyntheticTask& task, const PreferenceDataset& dataset,
                         const Objective& objective, const TrainConfig& cfg) {
  cfg.validate();
  const auto train = dataset.train();
  if (train.empty()) throw std::invalid_argument("dataset has no train records");

  const PolicyTable reference = reference_policy(task);
  TrainResult result{reference, {}};
  std::vector<double>& params = result.policy.logits.data;
  const std::size_t cols = task.n_completions;
  Adam adam(params.size());
  CounterRng shuffle_rng(cfg.seed, RngStream::kShuffle);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<PreferenceRecord> minibatch;
  std::vector<double> grad(params.size());

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::swap(order[i], order[shuffle_rng.index(i + 1)]);
    }
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    std::size_t step = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++step) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      minibatch.clear();
      for (std::size_t k = start; k < end; ++k) minibatch.push_back(train[order[k]]);

      const PreferenceBatch batch = batch_logps(result.policy, reference, minibatch);
      dsl::ProgramGradient g;
      try {
        g = objective_gradient(objective, batch, cfg.beta);
      } catch (const FiniteViolation& e) {
        throw DivergenceError(epoch, step, e.what());
      } catch (const ShapeError& e) {
        throw DivergenceError(epoch, step, e.what());
      }
      loss_sum += g.mean_loss * static_cast<double>(g.losses.size());
      loss_count += g.losses.size();

      std::fill(grad.begin(), grad.end(), 0.0);
      std::vector<std::vector<double>> probs(task.n_contexts);
      for (std::size_t i = 0; i < minibatch.size(); ++i) {
        const PreferenceRecord& r = minibatch[i];
        auto& p = probs[r.context];
        if (p.empty()) p = probs_of(result.policy.logits.row(r.context));
        const double dw = g.d_policy_chosen[i];
        const double dl = g.d_policy_rejected[i];
        double* row = grad.data() + r.context * cols;
        for (std::size_t y = 0; y < cols; ++y) row[y] -= (dw + dl) * p[y];
        row[r.chosen] += dw;
        row[r.rejected] += dl;
      }
      if (!all_finite(grad)) {
        throw DivergenceError(epoch, step, "non-finite parameter gradient");
      }
      if (cfg.optimizer == OptimizerKind::kAdam) {
        adam.step(params, grad, cfg.learning_rate);
      } else {
        for (std::size_t k = 0; k < params.size(); ++k) {
          params[k] -= cfg.learning_rate * grad[k];
        }
      }
      if (!all_finite(params)) {
        throw DivergenceError(epoch, step, "non-finite policy logits");
      }
    }
    result.trace.epoch_mean_loss.push_back(loss_sum / static_cast<double>(loss_count));
  }
  return result;
}

double expected_reward(const PolicyTable& policy, const SyntheticTask& task) {
  check_same_shape(policy, task);
  double total = 0.0;
  for (std::size_t x = 0; x < task.n_contexts; ++x) {
    const auto p = probs_of(policy.logits.row(x));
    double row = 0.0;
    for (std::size_t y = 0; y < task.n_completions; ++y) {
      row += p[y] * task.reward_table(x, y);
    }
    total += row;
  }
  return total / static_cast<double>(task.n_contexts);
}

double kl_divergence(const PolicyTable& policy, const SyntheticTask& task) {
  check_same_shape(policy, task);
  double total = 0.0;
  for (std::size_t x = 0; x < task.n_contexts; ++x) {
    const auto lp = policy.log_probs(x);
    const auto lr = log_softmax(task.reference_logits.row(x));
    double row = 0.0;
    for (std::size_t y = 0; y < task.n_completions; ++y) {
      const double p = std::exp(lp[y]);
      if (p > 0.0) row += p * (lp[y] - lr[y]);
    }
    total += row;
  }
  return std::max(0.0, total / static_cast<double>(task.n_contexts));
}

PolicyTable analytic_optimum(const SyntheticTask& task, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
  PolicyTable out{Matrix(task.n_contexts, task.n_completions)};
  for (std::size_t x = 0; x < task.n_contexts; ++x) {
    std::vector<double> tilted = log_softmax(task.reference_logits.row(x));
    for (std::size_t y = 0; y < task.n_completions; ++y) {
      tilted[y] += task.reward_table(x, y) / beta;
    }
    const auto normalized = log_softmax(tilted);
    std::copy(normalized.begin(), normalized.end(),
              out.logits.data.begin() + static_cast<std::ptrdiff_t>(x * task.n_completions));
  }
  return out;
}

double fitness(const SyntheticTask& task, const PolicyTable& policy) {
  return expected_reward(policy, task);
}

std::vector<FrontierPoint> frontier_sweep(const SyntheticTask& task,
                                          const Objective& objective,
                                          std::span<const double> betas,
                                          std::span<const std::uint64_t> seeds,
                                          const TrainConfig& cfg, std::size_t n_pairs,
                                          std::size_t threads) {
  for (double b : betas) {
    if (!(b > 0.0) || !std::isfinite(b)) {
      throw std::invalid_argument("betas must be positive");
    }
  }
  std::vector<FrontierPoint> points;
  for (double b : betas) {
    for (std::uint64_t s : seeds) points.push_back({b, s, std::nullopt, std::nullopt, false, {}});
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      FrontierPoint& pt = points[i];
      try {
        const PreferenceDataset ds = sample_preference_dataset(task, n_pairs, pt.seed);
        TrainConfig cell = cfg;
        cell.seed = pt.seed;
        cell.beta = pt.beta;
        const TrainResult r = train_policy(task, ds, objective, cell);
        pt.expected_reward = expected_reward(r.policy, task);
        pt.kl_divergence = kl_divergence(r.policy, task);
      } catch (const DivergenceError& e) {
        pt.diverged = true;
        pt.error = e.what();
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::size_t n_threads = threads ? threads : std::thread::hardware_concurrency();
  n_threads = std::clamp<std::size_t>(n_threads, 1, std::max<std::size_t>(1, points.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return points;
}

std::string frontier_csv(const Objective& objective, std::span<const FrontierPoint> points) {
  const std::string variant =
      std::holds_alternative<LossId>(objective.body)
          ? std::string(variant_name(objective.variant))
          : std::string("program");
  std::string out = csv_line(
      {"objective", "variant", "beta", "seed", "expected_reward", "kl", "diverged"});
  for (const auto& p : points) {
    out += csv_line({objective.label, variant, format_double(p.beta),
                     std::to_string(p.seed),
                     p.expected_reward ? format_double(*p.expected_reward) : "",
                     p.kl_divergence ? format_double(*p.kl_divergence) : "",
                     p.diverged ? "true" : "false"});
  }
  return out;
}

std::string trace_csv(const TrainTrace& trace) {
  std::string out = csv_line({"epoch", "mean_loss"});
  for (std::size_t e = 0; e < trace.epoch_mean_loss.size(); ++e) {
    out += csv_line({std::to_string(e), format_double(trace.epoch_mean_loss[e])});
  }
  return out;
}

}  // namespace disco
