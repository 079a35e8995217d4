#include <doctest.h>

#include "disco/errors.hpp"
#include "disco/run_config.hpp"

using namespace disco;

TEST_SUITE("run_config") {
  TEST_CASE("defaults round-trip through JSON") {
    const RunConfig def;
    CHECK(merge_config(RunConfig{}, config_to_json(def)) == def);
    RunConfig c;
    c.temperature = 0.7;
    c.betas = {0.1};
    c.seeds = {5, 6};
    c.burn_in = {"dpo"};
    CHECK(merge_config(RunConfig{}, config_to_json(c)) == c);
  }

  TEST_CASE("keys serialize in declaration order") {
    const std::string j = config_to_json(RunConfig{});
    CHECK(j.rfind("{\n  \"seed\": 0,\n  \"out\": \"run\",", 0) == 0);
    CHECK(j.find("\"temperature\": null") != std::string::npos);
    CHECK(j.find("\"seed\"") < j.find("\"backoff_seconds\""));
  }

  TEST_CASE("partial documents keep other defaults") {
    const RunConfig c = merge_config(RunConfig{}, R"({"beta": 0.25, "loss": "lrml"})");
    CHECK(c.beta == 0.25);
    CHECK(c.loss == "lrml");
    CHECK(c.epochs == RunConfig{}.epochs);
  }

  TEST_CASE("unknown and mistyped keys are named") {
    try {
      merge_config(RunConfig{}, R"({"betaz": 1})");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()) == "unknown config key \"betaz\"");
    }
    CHECK_THROWS_AS(merge_config(RunConfig{}, R"({"epochs": -1})"), ConfigError);
    CHECK_THROWS_AS(merge_config(RunConfig{}, R"({"epochs": 1.5})"), ConfigError);
    CHECK_THROWS_AS(merge_config(RunConfig{}, R"({"loss": 3})"), ConfigError);
    CHECK_THROWS_AS(merge_config(RunConfig{}, R"({"betas": [0.1, "x"]})"), ConfigError);
    CHECK_THROWS_AS(merge_config(RunConfig{}, "[1, 2]"), ConfigError);
    CHECK_THROWS_AS(merge_config(RunConfig{}, "{"), ConfigError);
    CHECK_THROWS_AS(load_config("no_such_config.json"), ConfigError);
  }

  TEST_CASE("conversions resolve names") {
    RunConfig c;
    c.loss = "lrml";
    c.variant = "as_discovered";
    CHECK(config_loss(c) == LossId::kLrml);
    CHECK(config_variant(c) == Variant::kAsDiscovered);
    c.loss = "nope";
    CHECK_THROWS_AS(config_loss(c), ConfigError);
    c.variant = "x";
    CHECK_THROWS_AS(config_variant(c), ConfigError);
  }

  TEST_CASE("train and discovery configs") {
    RunConfig c;
    c.optimizer = "sgd";
    c.learning_rate = 0.5;
    const TrainConfig t = to_train_config(c);
    CHECK(t.optimizer == OptimizerKind::kSgd);
    CHECK(t.learning_rate == 0.5);
    c.optimizer = "rmsprop";
    CHECK_THROWS_AS(to_train_config(c), ConfigError);
    c = RunConfig{};
    c.learning_rate = 0.0;
    CHECK_THROWS_AS(to_train_config(c), ConfigError);

    c = RunConfig{};
    c.context_order = "top_k_sorted";
    c.top_k = 3;
    const DiscoveryConfig d = to_discovery_config(c);
    CHECK(d.context_order == ContextOrder::kTopKSorted);
    CHECK(d.top_k == 3);
    CHECK(d.burn_in.size() == 4);
    c.burn_in = {"dpo", "bogus"};
    CHECK_THROWS_AS(to_discovery_config(c), ConfigError);
    c = RunConfig{};
    c.prompt_mode = "x";
    CHECK_THROWS_AS(to_discovery_config(c), ConfigError);
  }

  TEST_CASE("http settings") {
    RunConfig c;
    c.endpoint = "http://h:1/v1";
    c.max_retries = 7;
    const HttpSettings s = to_http_settings(c);
    CHECK(s.endpoint == "http://h:1/v1");
    CHECK(s.max_retries == 7);
    CHECK_FALSE(s.temperature.has_value());
  }
}
