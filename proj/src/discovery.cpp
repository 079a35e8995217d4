#include "disco/discovery.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "disco/candidate.hpp"
#include "disco/dsl.hpp"
#include "disco/errors.hpp"

namespace disco {

namespace {

std::vector<ChatMessage> top_k_context(std::vector<BurnInEntry> evaluated,
                                       const DiscoveryConfig& cfg,
                                       std::span<const ChatMessage> pending) {
  std::stable_sort(evaluated.begin(), evaluated.end(),
                   [](const BurnInEntry& a, const BurnInEntry& b) {
                     return a.fitness > b.fitness;
                   });
  if (evaluated.size() > cfg.top_k) evaluated.resize(cfg.top_k);
  std::reverse(evaluated.begin(), evaluated.end());
  std::vector<ChatMessage> context = build_burn_in_context(evaluated, cfg.mode);
  context.insert(context.end(), pending.begin(), pending.end());
  return context;
}

}  // namespace

std::string_view context_order_name(ContextOrder o) {
  return o == ContextOrder::kChronological ? "chronological" : "top_k_sorted";
}

std::optional<ContextOrder> context_order_from_name(std::string_view name) {
  if (name == "chronological") return ContextOrder::kChronological;
  if (name == "top_k_sorted") return ContextOrder::kTopKSorted;
  return std::nullopt;
}

void DiscoveryConfig::validate() const {
  if (top_k == 0) throw ConfigError("top_k must be at least 1");
  if (mode == PromptMode::kDsl && burn_in.empty()) {
    throw ConfigError("burn_in must list at least one loss");
  }
  if (task.n_contexts < 2 || task.n_completions < 2) {
    throw ConfigError("tasks need at least 2 contexts and 2 completions");
  }
  if (task.n_pairs < 1) throw ConfigError("pairs must be at least 1");
  try {
    train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

std::vector<BurnInEntry> measure_burn_in(const DiscoveryConfig& cfg,
                                         const SyntheticTask& task,
                                         const PreferenceDataset& dataset) {
  if (cfg.mode == PromptMode::kReplay) return replay_burn_in();
  TrainConfig train = cfg.train;
  train.seed = cfg.seed;
  std::vector<BurnInEntry> out;
  for (LossId id : cfg.burn_in) {
    const Objective objective = Objective::catalog(id);
    const TrainResult r = train_policy(task, dataset, objective, train);
    out.push_back({std::string(loss_name(id)), dsl::builtin_source(id),
                   fitness(task, r.policy)});
  }
  return out;
}

DiscoveryResult run_discovery(ChatProvider& provider, const DiscoveryConfig& cfg) {
  cfg.validate();
  const SyntheticTask task = make_task(cfg.task.seed, cfg.task.n_contexts,
                                       cfg.task.n_completions, cfg.task.reward_scale);
  const PreferenceDataset dataset =
      sample_preference_dataset(task, cfg.task.n_pairs, cfg.seed);
  TrainConfig train = cfg.train;
  train.seed = cfg.seed;

  DiscoveryResult result{cfg.archive_path ? Archive(*cfg.archive_path) : Archive(), {}};
  std::vector<BurnInEntry> evaluated = measure_burn_in(cfg, task, dataset);
  for (const auto& b : evaluated) result.archive.burn_in().push_back({b.name, b.fitness});
  result.transcript = build_burn_in_context(evaluated, cfg.mode);

  double best = evaluated.empty() ? 0.0 : evaluated.front().fitness;
  for (const auto& b : evaluated) best = std::max(best, b.fitness);
  std::size_t stale = 0;

  for (std::size_t gen = 0; gen < cfg.max_generations; ++gen) {
    const std::size_t gen_start = result.transcript.size();
    std::optional<double> gen_best;
    for (std::size_t attempt = 0;; ++attempt) {
      const std::string response =
          cfg.context_order == ContextOrder::kChronological
              ? provider.chat(result.transcript)
              : provider.chat(top_k_context(
                    evaluated, cfg,
                    std::span<const ChatMessage>(result.transcript).subspan(gen_start)));
      result.transcript.push_back({"assistant", response});

      CandidateRecord rec;
      rec.generation = gen;
      try {
        Candidate c = parse_candidate(response);
        rec.name = std::move(c.name);
        rec.thought = std::move(c.thought);
        rec.code = std::move(c.code);
        if (auto err = validate_candidate(rec.code, train.batch_size, cfg.seed, train.beta)) {
          rec.status = CandidateStatus::kValidationError;
          rec.error = *err;
        } else {
          const Objective objective =
              Objective::program(dsl::compile(rec.code), rec.name);
          try {
            const TrainResult r = train_policy(task, dataset, objective, train);
            rec.status = CandidateStatus::kValid;
            rec.fitness = fitness(task, r.policy);
          } catch (const DivergenceError& e) {
            rec.status = CandidateStatus::kDiverged;
            rec.error = e.what();
          }
        }
      } catch (const ParseFailure& e) {
        rec.status = CandidateStatus::kParseError;
        rec.error = e.what();
      }

      const bool valid = rec.status == CandidateStatus::kValid;
      const bool diverged = rec.status == CandidateStatus::kDiverged;
      result.transcript.push_back(valid ? feedback_message(*rec.fitness)
                                        : feedback_message(*rec.error));
      if (valid) {
        evaluated.push_back({rec.name, rec.code, *rec.fitness});
        gen_best = gen_best ? std::max(*gen_best, *rec.fitness) : *rec.fitness;
      }
      result.archive.add(std::move(rec));
      if (valid || diverged || attempt >= cfg.max_resamples) break;
    }
    if (gen_best && *gen_best > best) {
      best = *gen_best;
      stale = 0;
    } else {
      ++stale;
    }
    if (cfg.early_stop_patience > 0 && stale >= cfg.early_stop_patience) break;
  }
  return result;
}

ReplayReport replay_transcript(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open replay transcript " + path);
  ReplayReport report;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    const auto doc = nlohmann::json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
      report.mismatches.push_back(where + "not a JSON object");
      continue;
    }
    const std::string role = doc.value("role", "");
    if (role == "assistant") {
      try {
        const Candidate c = parse_candidate(doc.at("response").get<std::string>());
        report.names.push_back(c.name);
        if (doc.contains("name") && doc["name"] != c.name) {
          report.mismatches.push_back(where + "parsed name " + c.name +
                                      " differs from " + doc["name"].dump());
        }
      } catch (const std::exception& e) {
        report.mismatches.push_back(where + e.what());
      }
    } else if (role == "user") {
      const std::string expected = doc.value("expected", "");
      ChatMessage produced;
      if (doc.contains("fitness")) {
        produced = feedback_message(doc["fitness"].get<double>());
      } else {
        produced = feedback_message(doc.value("error", ""));
      }
      ++report.feedback_checked;
      if (produced.content != expected) {
        report.mismatches.push_back(where + "feedback differs: " +
                                    nlohmann::json(produced.content).dump());
      }
    } else {
      report.mismatches.push_back(where + "unknown role " + nlohmann::json(role).dump());
    }
  }
  return report;
}

}  // namespace disco
