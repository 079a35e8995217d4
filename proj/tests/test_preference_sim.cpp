#include <doctest.h>

#include <cmath>
#include <random>

#include "disco/errors.hpp"
#include "disco/preference_sim.hpp"
#include "disco/rng.hpp"
#include "oracle.hpp"

using namespace disco;

TEST_SUITE("preference_sim") {
  TEST_CASE("rng matches the golden sequence") {
    const auto doc = oracle::load_json("task_seed0_8x16.json");
    CounterRng r(0, RngStream::kRewardTable);
    CHECK(r.next_u64() == std::stoull(doc["first_u64_stream1"].get<std::string>(), nullptr, 0));
    CHECK(r.counter() == 1);
  }

  TEST_CASE("rng draws stay in range") {
    CounterRng r(9, RngStream::kProbe);
    for (int i = 0; i < 10000; ++i) {
      const double u = r.uniform();
      CHECK((u >= 0.0 && u < 1.0));
      CHECK(r.index(7) < 7);
    }
  }

  TEST_CASE("streams are independent") {
    CounterRng a(1, RngStream::kDataset);
    CounterRng b(1, RngStream::kShuffle);
    CHECK(a.next_u64() != b.next_u64());
  }

  TEST_CASE("task generation is bit-exact") {
    const auto doc = oracle::load_json("task_seed0_8x16.json");
    const SyntheticTask t = make_task(0, 8, 16, 5.0);
    REQUIRE(t.reward_table.data.size() == 128);
    for (std::size_t i = 0; i < 128; ++i) {
      CHECK(t.reward_table.data[i] == oracle::hex_double(doc["reward_table"][i]));
      CHECK(t.reference_logits.data[i] == oracle::hex_double(doc["reference_logits"][i]));
    }
    CHECK_THROWS(make_task(0, 1, 16));
    CHECK_THROWS(make_task(0, 8, 1));
  }

  TEST_CASE("log_softmax matches direct normalization") {
    std::mt19937_64 gen(1);
    std::normal_distribution<double> d(0.0, 3.0);
    for (int t = 0; t < 50; ++t) {
      std::vector<double> l(12);
      for (double& x : l) x = d(gen);
      const auto got = log_softmax(l);
      const auto want = oracle::brute_log_softmax(l);
      for (std::size_t i = 0; i < l.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-13));
    }
    const auto big = log_softmax(std::vector<double>{1000.0, 1000.0});
    CHECK(big[0] == doctest::Approx(-std::log(2.0)));
  }

  TEST_CASE("dataset sampling") {
    const SyntheticTask t = make_task(0);
    const PreferenceDataset ds = sample_preference_dataset(t, 1000, 4);
    CHECK(ds.records.size() == 1000);
    CHECK(ds.n_train == 900);
    CHECK(ds.heldout().size() == 100);
    for (const auto& r : ds.records) {
      CHECK(r.chosen != r.rejected);
      CHECK(r.context < 8);
      CHECK(r.chosen < 16);
    }
    const PreferenceDataset again = sample_preference_dataset(t, 1000, 4);
    CHECK(again.records.size() == ds.records.size());
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
      CHECK(again.records[i].chosen == ds.records[i].chosen);
      CHECK(again.records[i].rejected == ds.records[i].rejected);
    }
  }

  TEST_CASE("preferences follow the reward gap") {
    const SyntheticTask t = make_task(2);
    const PreferenceDataset ds = sample_preference_dataset(t, 20000, 2);
    double agree = 0.0;
    double expected = 0.0;
    for (const auto& r : ds.records) {
      const double rc = t.reward_table(r.context, r.chosen);
      const double rr = t.reward_table(r.context, r.rejected);
      agree += rc > rr ? 1.0 : 0.0;
      expected += std::max(oracle::sig(rc - rr), oracle::sig(rr - rc));
    }
    CHECK(agree / 20000.0 == doctest::Approx(expected / 20000.0).epsilon(0.02));
  }

  TEST_CASE("kl of the reference is zero and the two-point value is frozen") {
    const SyntheticTask t = make_task(0);
    CHECK(kl_divergence(reference_policy(t), t) == 0.0);

    SyntheticTask two;
    two.n_contexts = 1;
    two.n_completions = 2;
    two.reward_table = Matrix(1, 2, 0.0);
    two.reference_logits = Matrix(1, 2, 0.0);
    two.reference_logits(0, 0) = std::log(0.25);
    two.reference_logits(0, 1) = std::log(0.75);
    const PolicyTable p{Matrix(1, 2, 0.0)};
    const auto doc = oracle::load_json("loss_oracle.json");
    CHECK(kl_divergence(p, two) == doctest::Approx(doc["kl_two_point"].get<double>()).epsilon(1e-14));
  }

  TEST_CASE("analytic optimum frontier is monotone") {
    for (std::uint64_t seed : {0u, 1u, 2u, 3u}) {
      const SyntheticTask t = make_task(seed);
      double prev_kl = INFINITY;
      double prev_r = INFINITY;
      for (double beta : {0.05, 0.1, 0.5, 1.0}) {
        const PolicyTable opt = analytic_optimum(t, beta);
        const double kl = kl_divergence(opt, t);
        const double r = expected_reward(opt, t);
        CHECK(kl < prev_kl);
        CHECK(r <= prev_r);
        prev_kl = kl;
        prev_r = r;
      }
    }
  }

  TEST_CASE("batch_logps gathers log-probs") {
    const SyntheticTask t = make_task(0);
    const PolicyTable ref = reference_policy(t);
    const PreferenceRecord rec{3, 5, 7, true};
    const PreferenceBatch b = batch_logps(ref, ref, std::span(&rec, 1));
    const auto lp = ref.log_probs(3);
    CHECK(b.policy_chosen_logps[0] == lp[5]);
    CHECK(b.reference_rejected_logps[0] == lp[7]);
  }

  TEST_CASE("zero epochs keeps the reference bit-equal") {
    const SyntheticTask t = make_task(0);
    const PreferenceDataset ds = sample_preference_dataset(t, 512, 0);
    TrainConfig cfg;
    cfg.epochs = 0;
    const TrainResult r = train_policy(t, ds, Objective::catalog(LossId::kDpo), cfg);
    CHECK(r.policy.logits == t.reference_logits);
  }

  TEST_CASE("dpo training improves reward and is deterministic") {
    const SyntheticTask t = make_task(0);
    const PreferenceDataset ds = sample_preference_dataset(t, 2048, 0);
    TrainConfig cfg;
    cfg.beta = 0.1;
    cfg.epochs = 60;
    const TrainResult a = train_policy(t, ds, Objective::catalog(LossId::kDpo), cfg);
    const TrainResult b = train_policy(t, ds, Objective::catalog(LossId::kDpo), cfg);
    CHECK(a.policy.logits == b.policy.logits);
    CHECK(a.trace.epoch_mean_loss.size() == 60);
    CHECK(expected_reward(a.policy, t) > expected_reward(reference_policy(t), t));
    CHECK(a.trace.epoch_mean_loss.back() < a.trace.epoch_mean_loss.front());
  }

  TEST_CASE("sgd and program objectives train") {
    const SyntheticTask t = make_task(1);
    const PreferenceDataset ds = sample_preference_dataset(t, 1024, 1);
    TrainConfig cfg;
    cfg.epochs = 20;
    cfg.optimizer = OptimizerKind::kSgd;
    cfg.learning_rate = 1.0;
    const auto prog =
        Objective::program(dsl::compile("-logsigmoid(beta * ((pcl - prl) - (rcl - rrl)))"), "mine");
    const TrainResult a = train_policy(t, ds, prog, cfg);
    const TrainResult b = train_policy(t, ds, Objective::catalog(LossId::kDpo), cfg);
    for (std::size_t i = 0; i < a.policy.logits.data.size(); ++i) {
      CHECK(a.policy.logits.data[i] == doctest::Approx(b.policy.logits.data[i]).epsilon(1e-12));
    }
  }

  TEST_CASE("invalid train config") {
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = TrainConfig{};
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }

  TEST_CASE("divergent runs are recorded in the frontier") {
    const SyntheticTask t = make_task(0);
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.optimizer = OptimizerKind::kSgd;
    cfg.learning_rate = 1e4;
    const auto obj = Objective::program(dsl::compile("exp(prl - pcl)"), "blowup");
    const double betas[] = {0.1};
    const std::uint64_t seeds[] = {0, 1};
    const auto rows = frontier_sweep(t, obj, betas, seeds, cfg, 512, 1);
    REQUIRE(rows.size() == 2);
    for (const auto& r : rows) {
      CHECK(r.diverged);
      CHECK_FALSE(r.expected_reward.has_value());
      CHECK_FALSE(r.error.empty());
    }
    const std::string csv = frontier_csv(obj, rows);
    CHECK(csv.rfind("objective,variant,beta,seed,expected_reward,kl,diverged\n", 0) == 0);
    CHECK(csv.find(",true") != std::string::npos);
  }

  TEST_CASE("frontier rows keep their order across thread counts") {
    const SyntheticTask t = make_task(0);
    TrainConfig cfg;
    cfg.epochs = 3;
    const double betas[] = {0.05, 0.5};
    const std::uint64_t seeds[] = {0, 1, 2};
    const auto obj = Objective::catalog(LossId::kDpo);
    const auto one = frontier_sweep(t, obj, betas, seeds, cfg, 256, 1);
    const auto many = frontier_sweep(t, obj, betas, seeds, cfg, 256, 4);
    REQUIRE(one.size() == 6);
    CHECK(frontier_csv(obj, one) == frontier_csv(obj, many));
    CHECK(one[3].beta == 0.5);
    CHECK(one[3].seed == 0);
  }
}
