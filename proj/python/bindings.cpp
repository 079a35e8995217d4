#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "disco/candidate.hpp"
#include "disco/chat_provider.hpp"
#include "disco/cli.hpp"
#include "disco/discovery.hpp"
#include "disco/dsl.hpp"
#include "disco/errors.hpp"
#include "disco/loss_analysis.hpp"
#include "disco/losses.hpp"
#include "disco/preference_sim.hpp"
#include "disco/prompts.hpp"
#include "disco/run_config.hpp"

namespace py = pybind11;
using namespace disco;

namespace {

LossId loss_arg(const std::string& name) {
  const auto id = loss_from_name(name);
  if (!id) throw ConfigError("unknown loss \"" + name + "\"");
  return *id;
}

Variant variant_arg(const std::string& name) {
  const auto v = variant_from_name(name);
  if (!v) throw ConfigError("unknown variant \"" + name + "\"");
  return *v;
}

std::optional<PolicyLogps> policy_arg(std::optional<double> chosen,
                                      std::optional<double> rejected) {
  if (chosen.has_value() != rejected.has_value()) {
    throw std::invalid_argument("chosen_logp and rejected_logp go together");
  }
  if (!chosen) return std::nullopt;
  return PolicyLogps{*chosen, *rejected};
}

PreferenceBatch batch_arg(std::vector<double> pcl, std::vector<double> prl,
                          std::vector<double> rcl, std::vector<double> rrl) {
  return {BatchVector(std::move(pcl)), BatchVector(std::move(prl)),
          BatchVector(std::move(rcl)), BatchVector(std::move(rrl))};
}

Objective objective_arg(const std::string& loss, const std::string& variant,
                        const std::optional<std::string>& program) {
  if (program) return Objective::program(dsl::compile(*program), "program");
  return Objective::catalog(loss_arg(loss), variant_arg(variant));
}

py::dict config_dict(const RunConfig& cfg) {
  return py::module_::import("json").attr("loads")(config_to_json(cfg));
}

RunConfig config_arg(const py::dict& overrides) {
  const std::string text = py::module_::import("json").attr("dumps")(overrides).cast<std::string>();
  return merge_config(RunConfig{}, text);
}

py::dict record_dict(const CandidateRecord& r) {
  return py::module_::import("json").attr("loads")(r.to_json_line());
}

}  // namespace

PYBIND11_MODULE(_disco, m) {
  m.doc() = "Preference-optimization objectives, analysis and discovery loop";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<NotPointwise>(m, "NotPointwise", PyExc_ValueError);
  py::register_exception<FiniteViolation>(m, "FiniteViolation", PyExc_ArithmeticError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_RuntimeError);
  py::register_exception<ProviderError>(m, "ProviderError", PyExc_RuntimeError);
  py::register_exception<ParseFailure>(m, "ParseFailure", PyExc_ValueError);

  m.def("loss_names", [] {
    std::vector<std::string> out;
    for (const auto& s : all_loss_specs()) out.emplace_back(s.name);
    return out;
  });
  m.def("loss_info", [](const std::string& name) {
    const LossSpec& s = loss_spec(loss_arg(name));
    py::dict d;
    d["name"] = std::string(s.name);
    d["full_name"] = std::string(s.full_name);
    d["pointwise"] = s.pointwise;
    d["doubles_length"] = s.doubles_length;
    py::dict c;
    for (const auto& k : s.constants) c[py::str(std::string(k.name))] = k.value;
    d["constants"] = c;
    return d;
  });

  m.def(
      "eval_loss",
      [](const std::string& loss, double rho, double beta, const std::string& variant,
         std::optional<double> chosen_logp, std::optional<double> rejected_logp) {
        return eval_loss_pointwise(loss_arg(loss), rho, {beta, variant_arg(variant)},
                                   policy_arg(chosen_logp, rejected_logp));
      },
      py::arg("loss"), py::arg("rho"), py::arg("beta") = 0.05,
      py::arg("variant") = "beta_corrected", py::arg("chosen_logp") = py::none(),
      py::arg("rejected_logp") = py::none());

  m.def(
      "loss_derivative",
      [](const std::string& loss, double rho, double beta, const std::string& variant,
         std::optional<double> chosen_logp, std::optional<double> rejected_logp) {
        return loss_gradient_rho(loss_arg(loss), rho, {beta, variant_arg(variant)},
                                 policy_arg(chosen_logp, rejected_logp))
            .value;
      },
      py::arg("loss"), py::arg("rho"), py::arg("beta") = 0.05,
      py::arg("variant") = "beta_corrected", py::arg("chosen_logp") = py::none(),
      py::arg("rejected_logp") = py::none());

  m.def(
      "eval_loss_batch",
      [](const std::string& loss, std::vector<double> pcl, std::vector<double> prl,
         std::vector<double> rcl, std::vector<double> rrl, double beta,
         const std::string& variant) {
        return eval_loss_batch(loss_arg(loss), {beta, variant_arg(variant)},
                               batch_arg(std::move(pcl), std::move(prl), std::move(rcl),
                                         std::move(rrl)))
            .data();
      },
      py::arg("loss"), py::arg("pcl"), py::arg("prl"), py::arg("rcl"), py::arg("rrl"),
      py::arg("beta") = 0.05, py::arg("variant") = "beta_corrected");

  m.def(
      "stationary_points",
      [](const std::string& loss, double beta, const std::string& variant, double lo, double hi,
         std::size_t grid) {
        py::list out;
        for (const auto& p :
             find_stationary_points(loss_arg(loss), {beta, variant_arg(variant)}, lo, hi, grid)) {
          out.append(py::make_tuple(p.rho, p.value, std::string(kind_name(p.kind))));
        }
        return out;
      },
      py::arg("loss"), py::arg("beta") = 0.05, py::arg("variant") = "beta_corrected",
      py::arg("lo") = -10.0, py::arg("hi") = 10.0, py::arg("grid") = 10001);

  m.def(
      "convexity_profile",
      [](const std::string& loss, double beta, const std::string& variant, double lo, double hi,
         std::size_t grid) {
        py::list out;
        for (const auto& s :
             convexity_profile(loss_arg(loss), {beta, variant_arg(variant)}, lo, hi, grid)) {
          out.append(py::make_tuple(s.lo, s.hi, s.sign));
        }
        return out;
      },
      py::arg("loss"), py::arg("beta") = 0.05, py::arg("variant") = "beta_corrected",
      py::arg("lo") = -10.0, py::arg("hi") = 10.0, py::arg("grid") = 10001);

  m.def(
      "builtin_source",
      [](const std::string& loss, const std::string& variant) {
        return dsl::builtin_source(loss_arg(loss), variant_arg(variant));
      },
      py::arg("loss"), py::arg("variant") = "beta_corrected");

  m.def(
      "check_program",
      [](const std::string& source) -> std::optional<std::string> {
        dsl::ParseResult r = dsl::parse_program(source);
        if (auto* d = std::get_if<dsl::ParseDiagnostic>(&r)) return d->to_string();
        if (auto d = dsl::check_program(std::get<dsl::ObjectiveProgram>(r))) {
          return d->to_string();
        }
        return std::nullopt;
      },
      py::arg("source"), "None when the program is well formed, else the diagnostic text.");

  m.def("render_program", [](const std::string& source) { return dsl::render(dsl::compile(source)); },
        py::arg("source"));

  m.def(
      "eval_program",
      [](const std::string& source, std::vector<double> pcl, std::vector<double> prl,
         std::vector<double> rcl, std::vector<double> rrl, double beta) {
        return dsl::eval_program(dsl::compile(source),
                                 batch_arg(std::move(pcl), std::move(prl), std::move(rcl),
                                           std::move(rrl)),
                                 beta)
            .data();
      },
      py::arg("source"), py::arg("pcl"), py::arg("prl"), py::arg("rcl"), py::arg("rrl"),
      py::arg("beta") = 0.05);

  m.def(
      "validate_candidate",
      [](const std::string& source, std::size_t n_probe, std::uint64_t seed, double beta) {
        return validate_candidate(source, n_probe, seed, beta);
      },
      py::arg("source"), py::arg("n_probe") = 256, py::arg("seed") = 0, py::arg("beta") = 0.05);

  m.def(
      "parse_candidate",
      [](const std::string& response) {
        const Candidate c = parse_candidate(response);
        py::dict d;
        d["thought"] = c.thought;
        d["name"] = c.name;
        d["code"] = c.code;
        return d;
      },
      py::arg("response"));

  m.def(
      "make_task",
      [](std::uint64_t seed, std::size_t n_contexts, std::size_t n_completions,
         double reward_scale) {
        const SyntheticTask t = make_task(seed, n_contexts, n_completions, reward_scale);
        py::dict d;
        d["n_contexts"] = t.n_contexts;
        d["n_completions"] = t.n_completions;
        d["reward_table"] = t.reward_table.data;
        d["reference_logits"] = t.reference_logits.data;
        return d;
      },
      py::arg("seed") = 0, py::arg("n_contexts") = 8, py::arg("n_completions") = 16,
      py::arg("reward_scale") = 5.0);

  m.def(
      "train",
      [](const std::string& loss, const std::string& variant,
         const std::optional<std::string>& program, const py::dict& config) {
        const RunConfig cfg = config_arg(config);
        const SyntheticTask task =
            make_task(cfg.task_seed, cfg.n_contexts, cfg.n_completions, cfg.reward_scale);
        const PreferenceDataset ds = sample_preference_dataset(task, cfg.pairs, cfg.seed);
        const Objective obj = objective_arg(loss, variant, program);
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train_policy(task, ds, obj, to_train_config(cfg));
        }
        py::dict d;
        d["expected_reward"] = expected_reward(r.policy, task);
        d["kl"] = kl_divergence(r.policy, task);
        d["reference_reward"] = expected_reward(reference_policy(task), task);
        d["optimum_reward"] = expected_reward(analytic_optimum(task, cfg.beta), task);
        d["epoch_mean_loss"] = r.trace.epoch_mean_loss;
        d["logits"] = r.policy.logits.data;
        return d;
      },
      py::arg("loss") = "dpo", py::arg("variant") = "beta_corrected",
      py::arg("program") = py::none(), py::arg("config") = py::dict(),
      "Train one tabular policy. `config` holds run-configuration keys.");

  m.def(
      "frontier",
      [](const std::string& loss, const std::string& variant,
         const std::optional<std::string>& program, const py::dict& config) {
        const RunConfig cfg = config_arg(config);
        const SyntheticTask task =
            make_task(cfg.task_seed, cfg.n_contexts, cfg.n_completions, cfg.reward_scale);
        const Objective obj = objective_arg(loss, variant, program);
        std::vector<FrontierPoint> rows;
        {
          py::gil_scoped_release release;
          rows = frontier_sweep(task, obj, cfg.betas, cfg.seeds, to_train_config(cfg), cfg.pairs,
                                cfg.threads);
        }
        py::list out;
        for (const auto& p : rows) {
          py::dict d;
          d["beta"] = p.beta;
          d["seed"] = p.seed;
          d["expected_reward"] = p.expected_reward;
          d["kl"] = p.kl_divergence;
          d["diverged"] = p.diverged;
          d["error"] = p.error;
          out.append(d);
        }
        return out;
      },
      py::arg("loss") = "dpo", py::arg("variant") = "beta_corrected",
      py::arg("program") = py::none(), py::arg("config") = py::dict());

  m.def(
      "discover",
      [](const std::vector<std::string>& responses, const py::dict& config) {
        const RunConfig cfg = config_arg(config);
        MockProvider provider(responses);
        const DiscoveryResult r = run_discovery(provider, to_discovery_config(cfg));
        py::dict d;
        py::list records;
        for (const auto& rec : r.archive.records()) records.append(record_dict(rec));
        d["records"] = records;
        py::list transcript;
        for (const auto& msg : r.transcript) transcript.append(py::make_tuple(msg.role, msg.content));
        d["transcript"] = transcript;
        py::list burn_in;
        for (const auto& b : r.archive.burn_in()) burn_in.append(py::make_tuple(b.name, b.fitness));
        d["burn_in"] = burn_in;
        d["best"] = r.archive.best();
        return d;
      },
      py::arg("responses"), py::arg("config") = py::dict(),
      "Run the discovery loop against scripted responses.");

  m.def(
      "burn_in_context",
      [](const std::string& mode) {
        const auto pm = prompt_mode_from_name(mode);
        if (!pm) throw ConfigError("unknown prompt mode \"" + mode + "\"");
        std::vector<BurnInEntry> entries;
        if (*pm == PromptMode::kReplay) {
          entries = replay_burn_in();
        } else {
          for (LossId id : DiscoveryConfig{}.burn_in) {
            entries.push_back({std::string(loss_name(id)), dsl::builtin_source(id), 0.0});
          }
        }
        py::list out;
        for (const auto& msg : build_burn_in_context(entries, *pm)) {
          out.append(py::make_tuple(msg.role, msg.content));
        }
        return out;
      },
      py::arg("mode") = "replay");

  m.def("default_config", [] { return config_dict(RunConfig{}); });
  m.def("resolve_config", [](const py::dict& overrides) { return config_dict(config_arg(overrides)); },
        py::arg("overrides"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = run_command(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run a disco subcommand; returns (exit_code, stdout, stderr).");
}
