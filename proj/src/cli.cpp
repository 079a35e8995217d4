#include "disco/cli.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "disco/candidate.hpp"
#include "disco/chat_provider.hpp"
#include "disco/discovery.hpp"
#include "disco/dsl.hpp"
#include "disco/errors.hpp"
#include "disco/loss_analysis.hpp"
#include "disco/preference_sim.hpp"
#include "disco/run_config.hpp"
#include "disco/text_format.hpp"

namespace disco {

namespace {

namespace fs = std::filesystem;

// Thrown for bad flag combinations that CLI11 cannot express.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

fs::path prepare_out(const std::string& dir) {
  fs::path p(dir);
  fs::create_directories(p);
  return p;
}

// Flags that override config keys. Each binding copies its value into the
// RunConfig only when the flag was given.
class Overrides {
 public:
  template <typename T>
  CLI::Option* add(CLI::App* app, const std::string& flag, T RunConfig::*field,
                   const std::string& help) {
    auto holder = std::make_shared<T>();
    CLI::Option* opt = app->add_option(flag, *holder, help);
    apply_.push_back([opt, holder, field](RunConfig& cfg) {
      if (opt->count() > 0) cfg.*field = *holder;
    });
    holders_.push_back(holder);
    return opt;
  }

  CLI::Option* add_list(CLI::App* app, const std::string& flag,
                        std::vector<double> RunConfig::*field, const std::string& help) {
    return add(app, flag, field, help)->delimiter(',');
  }

  CLI::Option* add_seeds(CLI::App* app, const std::string& flag,
                         std::vector<std::uint64_t> RunConfig::*field,
                         const std::string& help) {
    return add(app, flag, field, help)->delimiter(',');
  }

  void apply(RunConfig& cfg) const {
    for (const auto& f : apply_) f(cfg);
  }

 private:
  std::vector<std::function<void(RunConfig&)>> apply_;
  std::vector<std::shared_ptr<void>> holders_;
};

struct Common {
  std::string config_path;
  Overrides overrides;

  RunConfig resolve() const {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
    overrides.apply(cfg);
    return cfg;
  }
};

void add_objective_flags(CLI::App* app, Common& c) {
  c.overrides.add(app, "--loss", &RunConfig::loss, "catalog loss id");
  c.overrides.add(app, "--variant", &RunConfig::variant,
                  "beta_corrected or as_discovered");
  c.overrides.add(app, "--beta", &RunConfig::beta, "KL strength");
}

void add_train_flags(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "JSON run configuration")
      ->check(CLI::ExistingFile);
  c.overrides.add(app, "--out", &RunConfig::out, "output directory");
  c.overrides.add(app, "--seed", &RunConfig::seed, "dataset and shuffling seed");
  c.overrides.add(app, "--task-seed", &RunConfig::task_seed, "task generator seed");
  c.overrides.add(app, "--epochs", &RunConfig::epochs, "training epochs");
  c.overrides.add(app, "--pairs", &RunConfig::pairs, "preference pairs");
  c.overrides.add(app, "--lr", &RunConfig::learning_rate, "learning rate");
  c.overrides.add(app, "--batch-size", &RunConfig::batch_size, "minibatch size");
  c.overrides.add(app, "--optimizer", &RunConfig::optimizer, "adam or sgd");
}

SyntheticTask task_of(const RunConfig& cfg) {
  return make_task(cfg.task_seed, cfg.n_contexts, cfg.n_completions, cfg.reward_scale);
}

Objective objective_of(const RunConfig& cfg, const std::string& dsl_path) {
  if (!dsl_path.empty()) {
    return Objective::program(dsl::compile(read_file(dsl_path)),
                              fs::path(dsl_path).stem().string());
  }
  return Objective::catalog(config_loss(cfg), config_variant(cfg));
}

std::optional<PolicyLogps> policy_of(const std::optional<double>& chosen,
                                     const std::optional<double>& rejected) {
  if (chosen.has_value() != rejected.has_value()) {
    throw UsageError("--chosen-logp and --rejected-logp go together");
  }
  if (!chosen) return std::nullopt;
  return PolicyLogps{*chosen, *rejected};
}

// eval-loss ---------------------------------------------------------------

struct EvalArgs {
  Common common;
  std::vector<double> rho;
  std::vector<double> pcl, prl, rcl, rrl;
  std::optional<double> chosen, rejected;
  std::string dsl_path;
};

void cmd_eval(const EvalArgs& a, std::ostream& out) {
  const RunConfig cfg = a.common.resolve();
  const bool batch_mode = !a.pcl.empty() || !a.prl.empty() || !a.rcl.empty() ||
                          !a.rrl.empty();
  if (batch_mode == !a.rho.empty()) {
    throw UsageError("give either --rho or all of --pcl --prl --rcl --rrl");
  }
  const LossParams params{cfg.beta, config_variant(cfg)};
  if (!batch_mode && a.dsl_path.empty()) {
    const LossId id = config_loss(cfg);
    const auto policy = policy_of(a.chosen, a.rejected);
    for (double r : a.rho) out << format_double(eval_loss_pointwise(id, r, params, policy)) << '\n';
    return;
  }
  PreferenceBatch batch;
  if (batch_mode) {
    batch = {BatchVector(a.pcl), BatchVector(a.prl), BatchVector(a.rcl), BatchVector(a.rrl)};
  } else {
    // rho enters as the policy chosen log-prob with every other term zero.
    const std::size_t n = a.rho.size();
    batch = {BatchVector(a.rho), BatchVector::filled(n, 0.0), BatchVector::filled(n, 0.0),
             BatchVector::filled(n, 0.0)};
  }
  const BatchVector losses =
      a.dsl_path.empty()
          ? eval_loss_batch(config_loss(cfg), params, batch)
          : dsl::eval_program(dsl::compile(read_file(a.dsl_path)), batch, cfg.beta);
  for (double v : losses.values()) out << format_double(v) << '\n';
}

// analyze -------------------------------------------------------------------

struct AnalyzeArgs {
  Common common;
  double lo = -10.0;
  double hi = 10.0;
  std::size_t grid = 10001;
  std::size_t sweep_points = 401;
  std::optional<double> chosen, rejected;
};

void cmd_analyze(const AnalyzeArgs& a, std::ostream& out) {
  const RunConfig cfg = a.common.resolve();
  const LossId id = config_loss(cfg);
  const LossParams params{cfg.beta, config_variant(cfg)};
  const auto policy = policy_of(a.chosen, a.rejected);
  const auto points = find_stationary_points(id, params, a.lo, a.hi, a.grid, 1e-10, policy);
  const auto segments = convexity_profile(id, params, a.lo, a.hi, a.grid, policy);
  const auto grid = linspace(a.lo, a.hi, a.sweep_points);
  const auto rows = beta_sweep_table(id, cfg.betas, grid, params.variant, policy);

  const fs::path dir = prepare_out(cfg.out);
  write_file(dir / "stationary.csv", stationary_csv(id, params, points));
  write_file(dir / "convexity.csv", convexity_csv(id, params, segments));
  write_file(dir / "sweep.csv", sweep_csv(id, params.variant, rows));
  write_file(dir / "run_config.json", config_to_json(cfg));

  out << "loss " << loss_name(id) << " (" << variant_name(params.variant)
      << ", beta " << format_double(params.beta) << ")\n";
  for (const auto& p : points) {
    out << kind_name(p.kind) << " at rho " << format_double(p.rho) << ", f "
        << format_double(p.value) << '\n';
  }
  if (points.empty()) out << "no stationary points in range\n";
  out << "convexity segments: " << segments.size() << '\n';
  out << "wrote " << (dir / "stationary.csv").string() << ", "
      << (dir / "convexity.csv").string() << ", " << (dir / "sweep.csv").string() << '\n';
}

// train -------------------------------------------------------------------

struct TrainArgs {
  Common common;
  std::string dsl_path;
};

void cmd_train(const TrainArgs& a, std::ostream& out) {
  const RunConfig cfg = a.common.resolve();
  const TrainConfig train = to_train_config(cfg);
  const Objective objective = objective_of(cfg, a.dsl_path);
  const fs::path dir = prepare_out(cfg.out);
  write_file(dir / "run_config.json", config_to_json(cfg));

  const SyntheticTask task = task_of(cfg);
  const PreferenceDataset data = sample_preference_dataset(task, cfg.pairs, cfg.seed);
  const TrainResult r = train_policy(task, data, objective, train);
  write_file(dir / "trace.csv", trace_csv(r.trace));

  const double reward = expected_reward(r.policy, task);
  const double kl = kl_divergence(r.policy, task);
  const double ref_reward = expected_reward(reference_policy(task), task);
  const double opt_reward = expected_reward(analytic_optimum(task, cfg.beta), task);
  nlohmann::ordered_json summary;
  summary["objective"] = objective.label;
  summary["beta"] = cfg.beta;
  summary["expected_reward"] = reward;
  summary["kl"] = kl;
  summary["reference_reward"] = ref_reward;
  summary["optimum_reward"] = opt_reward;
  summary["final_loss"] =
      r.trace.epoch_mean_loss.empty() ? nlohmann::ordered_json(nullptr)
                                      : nlohmann::ordered_json(r.trace.epoch_mean_loss.back());
  write_file(dir / "summary.json", summary.dump(2) + "\n");

  out << "objective " << objective.label << '\n'
      << "expected_reward " << format_double(reward) << '\n'
      << "kl " << format_double(kl) << '\n'
      << "reference_reward " << format_double(ref_reward) << '\n'
      << "optimum_reward " << format_double(opt_reward) << '\n';
}

// sweep -------------------------------------------------------------------

struct SweepArgs {
  Common common;
  std::string dsl_path;
};

void cmd_sweep(const SweepArgs& a, std::ostream& out) {
  const RunConfig cfg = a.common.resolve();
  const TrainConfig train = to_train_config(cfg);
  const Objective objective = objective_of(cfg, a.dsl_path);
  const fs::path dir = prepare_out(cfg.out);
  write_file(dir / "run_config.json", config_to_json(cfg));
  const SyntheticTask task = task_of(cfg);
  const auto points =
      frontier_sweep(task, objective, cfg.betas, cfg.seeds, train, cfg.pairs, cfg.threads);
  write_file(dir / "frontier.csv", frontier_csv(objective, points));
  std::size_t diverged = 0;
  for (const auto& p : points) diverged += p.diverged ? 1 : 0;
  out << "wrote " << (dir / "frontier.csv").string() << ": " << points.size()
      << " rows, " << diverged << " diverged\n";
}

// discover ------------------------------------------------------------------

void cmd_discover(const Common& common, std::ostream& out) {
  const RunConfig cfg = common.resolve();
  DiscoveryConfig dcfg = to_discovery_config(cfg);
  std::unique_ptr<ChatProvider> provider;
  if (cfg.provider == "mock") {
    if (cfg.script.empty()) throw UsageError("--provider mock needs --script");
    provider = std::make_unique<MockProvider>(MockProvider::from_script(cfg.script));
  } else if (cfg.provider == "http") {
    provider = std::make_unique<HttpProvider>(to_http_settings(cfg));
  } else {
    throw UsageError("unknown provider \"" + cfg.provider + "\" (expected http or mock)");
  }
  const fs::path dir = prepare_out(cfg.out);
  write_file(dir / "run_config.json", config_to_json(cfg));
  dcfg.archive_path = (dir / "archive.jsonl").string();

  const DiscoveryResult result = run_discovery(*provider, dcfg);

  std::string transcript;
  for (const auto& m : result.transcript) {
    nlohmann::ordered_json line;
    line["role"] = m.role;
    line["content"] = m.content;
    transcript += line.dump() + "\n";
  }
  write_file(dir / "transcript.jsonl", transcript);
  nlohmann::ordered_json burn = nlohmann::ordered_json::array();
  for (const auto& b : result.archive.burn_in()) {
    burn.push_back({{"name", b.name}, {"fitness", b.fitness}});
  }
  write_file(dir / "burn_in.json", burn.dump(2) + "\n");

  for (const auto& b : result.archive.burn_in()) {
    out << "burn-in " << b.name << " fitness " << format_double(b.fitness) << '\n';
  }
  for (const auto& r : result.archive.records()) {
    out << "generation " << r.generation << ' ' << (r.name.empty() ? "-" : r.name) << ' '
        << status_name(r.status);
    if (r.fitness) out << " fitness " << format_double(*r.fitness);
    out << '\n';
  }
  if (auto best = result.archive.best()) {
    const auto& r = result.archive.records()[*best];
    out << "best " << r.name << " fitness " << format_double(*r.fitness) << '\n';
  } else {
    out << "no valid candidates\n";
  }
}

// replay --------------------------------------------------------------------

struct ReplayArgs {
  std::string script;
  bool print_prompt = false;
};

int cmd_replay(const ReplayArgs& a, std::ostream& out, std::ostream& err) {
  if (a.print_prompt) {
    const auto context = build_burn_in_context(replay_burn_in(), PromptMode::kReplay);
    for (const auto& m : context) out << "[" << m.role << "]\n" << m.content << "\n";
  }
  if (a.script.empty()) {
    if (a.print_prompt) return 0;
    throw UsageError("replay needs --script");
  }
  const ReplayReport report = replay_transcript(a.script);
  for (const auto& n : report.names) out << n << '\n';
  out << "responses " << report.names.size() << ", feedback checked "
      << report.feedback_checked << '\n';
  for (const auto& m : report.mismatches) err << "mismatch: " << m << '\n';
  out << (report.ok() ? "replay ok" : "replay FAILED") << '\n';
  return report.ok() ? 0 : 1;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out,
                std::ostream& err) {
  CLI::App app{"Preference-optimization loss laboratory", "disco"};
  app.require_subcommand(1);

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval-loss", "Evaluate a loss pointwise or on a batch");
  eval_cmd->add_option("--config", eval.common.config_path, "JSON run configuration")
      ->check(CLI::ExistingFile);
  add_objective_flags(eval_cmd, eval.common);
  eval_cmd->add_option("--rho", eval.rho, "log-ratio difference(s)")->delimiter(',');
  eval_cmd->add_option("--pcl", eval.pcl, "policy chosen log-probs")->delimiter(',');
  eval_cmd->add_option("--prl", eval.prl, "policy rejected log-probs")->delimiter(',');
  eval_cmd->add_option("--rcl", eval.rcl, "reference chosen log-probs")->delimiter(',');
  eval_cmd->add_option("--rrl", eval.rrl, "reference rejected log-probs")->delimiter(',');
  eval_cmd->add_option("--chosen-logp", eval.chosen, "policy chosen log-prob (pfl)");
  eval_cmd->add_option("--rejected-logp", eval.rejected, "policy rejected log-prob (pfl)");
  eval_cmd->add_option("--dsl", eval.dsl_path, "objective program file")
      ->check(CLI::ExistingFile);

  AnalyzeArgs analyze;
  auto* analyze_cmd =
      app.add_subcommand("analyze", "Stationary points, convexity and beta sweep CSVs");
  analyze_cmd->add_option("--config", analyze.common.config_path, "JSON run configuration")
      ->check(CLI::ExistingFile);
  add_objective_flags(analyze_cmd, analyze.common);
  analyze.common.overrides.add_list(analyze_cmd, "--betas", &RunConfig::betas,
                                    "betas for the sweep table");
  analyze.common.overrides.add(analyze_cmd, "--out", &RunConfig::out, "output directory");
  analyze_cmd->add_option("--lo", analyze.lo, "lower rho bound");
  analyze_cmd->add_option("--hi", analyze.hi, "upper rho bound");
  analyze_cmd->add_option("--grid", analyze.grid, "grid points for the scans");
  analyze_cmd->add_option("--sweep-points", analyze.sweep_points, "rho points per beta");
  analyze_cmd->add_option("--chosen-logp", analyze.chosen, "policy chosen log-prob (pfl)");
  analyze_cmd->add_option("--rejected-logp", analyze.rejected,
                          "policy rejected log-prob (pfl)");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train one policy and write its trace");
  add_train_flags(train_cmd, train.common);
  add_objective_flags(train_cmd, train.common);
  train_cmd->add_option("--dsl", train.dsl_path, "objective program file")
      ->check(CLI::ExistingFile);

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Reward/KL frontier over betas and seeds");
  add_train_flags(sweep_cmd, sweep.common);
  add_objective_flags(sweep_cmd, sweep.common);
  sweep.common.overrides.add_list(sweep_cmd, "--betas", &RunConfig::betas, "betas");
  sweep.common.overrides.add_seeds(sweep_cmd, "--seeds", &RunConfig::seeds, "seeds");
  sweep.common.overrides.add(sweep_cmd, "--threads", &RunConfig::threads,
                             "worker threads (0: all cores)");
  sweep_cmd->add_option("--dsl", sweep.dsl_path, "objective program file")
      ->check(CLI::ExistingFile);

  Common discover;
  auto* discover_cmd = app.add_subcommand("discover", "Run the objective discovery loop");
  add_train_flags(discover_cmd, discover);
  discover.overrides.add(discover_cmd, "--beta", &RunConfig::beta, "KL strength");
  discover.overrides.add(discover_cmd, "--provider", &RunConfig::provider, "http or mock")
      ->check(CLI::IsMember({"http", "mock"}));
  discover.overrides.add(discover_cmd, "--script", &RunConfig::script,
                         "mock responses (JSONL)");
  discover.overrides.add(discover_cmd, "--generations", &RunConfig::max_generations,
                         "maximum generations");
  discover.overrides.add(discover_cmd, "--resamples", &RunConfig::max_resamples,
                         "resamples after a failed candidate");
  discover.overrides.add(discover_cmd, "--prompt-mode", &RunConfig::prompt_mode,
                         "dsl or replay");
  discover.overrides.add(discover_cmd, "--endpoint", &RunConfig::endpoint,
                         "chat-completions base URL");
  discover.overrides.add(discover_cmd, "--model", &RunConfig::model, "model name");

  ReplayArgs replay;
  auto* replay_cmd =
      app.add_subcommand("replay", "Check a recorded transcript against the feedback templates");
  replay_cmd->add_option("--script", replay.script, "transcript JSONL")
      ->check(CLI::ExistingFile);
  replay_cmd->add_flag("--print-prompt", replay.print_prompt,
                       "print the replay-mode burn-in context");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return 2;
  }

  try {
    if (eval_cmd->parsed()) {
      cmd_eval(eval, out);
    } else if (analyze_cmd->parsed()) {
      cmd_analyze(analyze, out);
    } else if (train_cmd->parsed()) {
      cmd_train(train, out);
    } else if (sweep_cmd->parsed()) {
      cmd_sweep(sweep, out);
    } else if (discover_cmd->parsed()) {
      cmd_discover(discover, out);
    } else if (replay_cmd->parsed()) {
      return cmd_replay(replay, out, err);
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace disco
