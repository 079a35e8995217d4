#include "disco/run_config.hpp"

#include <fstream>
#include <sstream>
#include <type_traits>
#include <variant>

#include <json.hpp>

#include "disco/errors.hpp"

namespace disco {

namespace {

static_assert(std::is_same_v<std::size_t, std::uint64_t>,
              "count and seed fields share one integer representation");

using Json = nlohmann::ordered_json;

using FieldPtr =
    std::variant<std::size_t RunConfig::*, double RunConfig::*, std::string RunConfig::*,
                 std::vector<double> RunConfig::*, std::vector<std::uint64_t> RunConfig::*,
                 std::vector<std::string> RunConfig::*, std::optional<double> RunConfig::*>;

struct Field {
  const char* key;
  FieldPtr ptr;
};

const Field kFields[] = {
    {"seed", &RunConfig::seed},
    {"out", &RunConfig::out},
    {"task_seed", &RunConfig::task_seed},
    {"n_contexts", &RunConfig::n_contexts},
    {"n_completions", &RunConfig::n_completions},
    {"reward_scale", &RunConfig::reward_scale},
    {"pairs", &RunConfig::pairs},
    {"loss", &RunConfig::loss},
    {"variant", &RunConfig::variant},
    {"beta", &RunConfig::beta},
    {"betas", &RunConfig::betas},
    {"seeds", &RunConfig::seeds},
    {"learning_rate", &RunConfig::learning_rate},
    {"epochs", &RunConfig::epochs},
    {"batch_size", &RunConfig::batch_size},
    {"optimizer", &RunConfig::optimizer},
    {"threads", &RunConfig::threads},
    {"max_generations", &RunConfig::max_generations},
    {"max_resamples", &RunConfig::max_resamples},
    {"early_stop_patience", &RunConfig::early_stop_patience},
    {"prompt_mode", &RunConfig::prompt_mode},
    {"context_order", &RunConfig::context_order},
    {"top_k", &RunConfig::top_k},
    {"burn_in", &RunConfig::burn_in},
    {"provider", &RunConfig::provider},
    {"script", &RunConfig::script},
    {"endpoint", &RunConfig::endpoint},
    {"model", &RunConfig::model},
    {"temperature", &RunConfig::temperature},
    {"timeout_seconds", &RunConfig::timeout_seconds},
    {"max_retries", &RunConfig::max_retries},
    {"backoff_seconds", &RunConfig::backoff_seconds},
};

[[noreturn]] void bad_type(const std::string& key, const char* expected) {
  throw ConfigError("config key \"" + key + "\" must be " + expected);
}

std::size_t read_count(const Json& v, const std::string& key) {
  if (!v.is_number_unsigned()) bad_type(key, "a non-negative integer");
  return v.get<std::size_t>();
}

double read_number(const Json& v, const std::string& key) {
  if (!v.is_number()) bad_type(key, "a number");
  return v.get<double>();
}

void assign(RunConfig& cfg, const Field& f, const Json& v) {
  const std::string key = f.key;
  std::visit(
      [&](auto ptr) {
        using T = std::remove_reference_t<decltype(cfg.*ptr)>;
        if constexpr (std::is_same_v<T, std::size_t>) {
          cfg.*ptr = read_count(v, key);
        } else if constexpr (std::is_same_v<T, double>) {
          cfg.*ptr = read_number(v, key);
        } else if constexpr (std::is_same_v<T, std::string>) {
          if (!v.is_string()) bad_type(key, "a string");
          cfg.*ptr = v.get<std::string>();
        } else if constexpr (std::is_same_v<T, std::optional<double>>) {
          cfg.*ptr = v.is_null() ? std::nullopt : std::optional<double>(read_number(v, key));
        } else {
          if (!v.is_array()) bad_type(key, "an array");
          T out;
          for (const auto& e : v) {
            if constexpr (std::is_same_v<T, std::vector<double>>) {
              out.push_back(read_number(e, key));
            } else if constexpr (std::is_same_v<T, std::vector<std::uint64_t>>) {
              out.push_back(read_count(e, key));
            } else {
              if (!e.is_string()) bad_type(key, "an array of strings");
              out.push_back(e.get<std::string>());
            }
          }
          cfg.*ptr = std::move(out);
        }
      },
      f.ptr);
}

Json to_json(const RunConfig& cfg, const Field& f) {
  return std::visit(
      [&](auto ptr) -> Json {
        const auto& value = cfg.*ptr;
        using T = std::remove_cvref_t<decltype(value)>;
        if constexpr (std::is_same_v<T, std::optional<double>>) {
          return value ? Json(*value) : Json(nullptr);
        } else {
          return Json(value);
        }
      },
      f.ptr);
}

}  // namespace

RunConfig merge_config(const RunConfig& base, std::string_view json_text) {
  const Json doc = Json::parse(json_text, nullptr, false);
  if (doc.is_discarded()) throw ConfigError("config is not well-formed JSON");
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig cfg = base;
  for (const auto& [key, value] : doc.items()) {
    const Field* field = nullptr;
    for (const auto& f : kFields) {
      if (key == f.key) field = &f;
    }
    if (!field) throw ConfigError("unknown config key \"" + key + "\"");
    assign(cfg, *field, value);
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return merge_config(RunConfig{}, ss.str());
}

std::string config_to_json(const RunConfig& cfg) {
  Json doc = Json::object();
  for (const auto& f : kFields) doc[f.key] = to_json(cfg, f);
  return doc.dump(2) + "\n";
}

LossId config_loss(const RunConfig& cfg) {
  const auto id = loss_from_name(cfg.loss);
  if (!id) throw ConfigError("unknown loss \"" + cfg.loss + "\"");
  return *id;
}

Variant config_variant(const RunConfig& cfg) {
  const auto v = variant_from_name(cfg.variant);
  if (!v) {
    throw ConfigError("unknown variant \"" + cfg.variant +
                      "\" (expected beta_corrected or as_discovered)");
  }
  return *v;
}

TrainConfig to_train_config(const RunConfig& cfg) {
  TrainConfig t;
  t.learning_rate = cfg.learning_rate;
  t.epochs = cfg.epochs;
  t.batch_size = cfg.batch_size;
  t.seed = cfg.seed;
  t.beta = cfg.beta;
  const auto opt = optimizer_from_name(cfg.optimizer);
  if (!opt) throw ConfigError("unknown optimizer \"" + cfg.optimizer + "\"");
  t.optimizer = *opt;
  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return t;
}

DiscoveryConfig to_discovery_config(const RunConfig& cfg) {
  DiscoveryConfig d;
  d.max_generations = cfg.max_generations;
  d.max_resamples = cfg.max_resamples;
  d.early_stop_patience = cfg.early_stop_patience;
  const auto mode = prompt_mode_from_name(cfg.prompt_mode);
  if (!mode) throw ConfigError("unknown prompt_mode \"" + cfg.prompt_mode + "\"");
  d.mode = *mode;
  const auto order = context_order_from_name(cfg.context_order);
  if (!order) throw ConfigError("unknown context_order \"" + cfg.context_order + "\"");
  d.context_order = *order;
  d.top_k = cfg.top_k;
  d.burn_in.clear();
  for (const auto& name : cfg.burn_in) {
    const auto id = loss_from_name(name);
    if (!id) throw ConfigError("unknown burn_in loss \"" + name + "\"");
    d.burn_in.push_back(*id);
  }
  d.task = {cfg.task_seed, cfg.n_contexts, cfg.n_completions, cfg.reward_scale, cfg.pairs};
  d.train = to_train_config(cfg);
  d.seed = cfg.seed;
  d.validate();
  return d;
}

HttpSettings to_http_settings(const RunConfig& cfg) {
  HttpSettings s;
  s.endpoint = cfg.endpoint;
  s.model = cfg.model;
  s.temperature = cfg.temperature;
  s.timeout_seconds = cfg.timeout_seconds;
  s.max_retries = cfg.max_retries;
  s.backoff_initial_seconds = cfg.backoff_seconds;
  return s;
}

}  // namespace disco
