#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "disco/cli.hpp"
#include "disco/dsl.hpp"
#include "oracle.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = disco::run_command(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("eval-loss prints one value per rho") {
    const Run r = run({"eval-loss", "--loss", "lrml", "--rho", "-2.3714,1.44012"});
    REQUIRE(r.code == 0);
    std::istringstream in(r.out);
    double a = 0, b = 0;
    in >> a >> b;
    CHECK(a == doctest::Approx(0.785929).epsilon(1e-5));
    CHECK(b == doctest::Approx(0.87829).epsilon(1e-5));
  }

  TEST_CASE("eval-loss on a batch") {
    const Run r = run({"eval-loss", "--loss", "dpo", "--beta", "0.1", "--pcl", "-1,-2", "--prl",
                       "-2,-1", "--rcl", "-1,-1", "--rrl", "-1,-1"});
    REQUIRE(r.code == 0);
    std::istringstream in(r.out);
    double a = 0, b = 0;
    in >> a >> b;
    CHECK(a == doctest::Approx(oracle::dpo(1.0, 0.1)));
    CHECK(b == doctest::Approx(oracle::dpo(-1.0, 0.1)));
  }

  TEST_CASE("eval-loss with a program file") {
    const fs::path dsl = "cli_prog.dsl";
    { std::ofstream(dsl) << disco::dsl::builtin_source(disco::LossId::kSlic); }
    const Run r = run({"eval-loss", "--dsl", dsl.string(), "--pcl", "-1", "--prl", "-3",
                       "--rcl", "-2", "--rrl", "-2"});
    REQUIRE(r.code == 0);
    CHECK(std::stod(r.out) == doctest::Approx(oracle::slic(2.0, 0.05)));
    fs::remove(dsl);
  }

  TEST_CASE("usage errors exit with 2") {
    CHECK(run({}).code == 2);
    CHECK(run({"bogus"}).code == 2);
    CHECK(run({"eval-loss", "--loss", "nope", "--rho", "1"}).code == 2);
    CHECK(run({"eval-loss", "--loss", "dpo", "--rho", "abc"}).code == 2);
    CHECK(run({"eval-loss", "--loss", "dpo"}).code == 2);
    CHECK(run({"train", "--config", "missing.json"}).code == 2);
    const fs::path cfg = "cli_bad.json";
    { std::ofstream(cfg) << R"({"betaz": 1})"; }
    const Run r = run({"train", "--config", cfg.string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("betaz") != std::string::npos);
    fs::remove(cfg);
  }

  TEST_CASE("help exits with 0") {
    const Run r = run({"--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("discover") != std::string::npos);
  }

  TEST_CASE("runtime errors exit with 1") {
    CHECK(run({"eval-loss", "--loss", "kto_pair", "--rho", "1"}).code == 1);
  }

  TEST_CASE("train writes its artifacts") {
    const fs::path out = "cli_train_out";
    fs::remove_all(out);
    const Run r = run({"train", "--loss", "dpo", "--epochs", "3", "--pairs", "256", "--out",
                       out.string()});
    REQUIRE(r.code == 0);
    CHECK(fs::exists(out / "run_config.json"));
    CHECK(fs::exists(out / "summary.json"));
    const std::string trace = slurp(out / "trace.csv");
    CHECK(trace.rfind("epoch,mean_loss\n", 0) == 0);
    CHECK(std::count(trace.begin(), trace.end(), '\n') == 4);
    const auto cfg = nlohmann::json::parse(slurp(out / "run_config.json"));
    CHECK(cfg["epochs"] == 3);
    fs::remove_all(out);
  }

  TEST_CASE("flags override the config file") {
    const fs::path cfg = "cli_cfg.json";
    const fs::path out = "cli_override_out";
    { std::ofstream(cfg) << R"({"epochs": 2, "pairs": 128, "beta": 0.3})"; }
    const Run r = run({"train", "--config", cfg.string(), "--epochs", "1", "--out", out.string()});
    REQUIRE(r.code == 0);
    const auto saved = nlohmann::json::parse(slurp(out / "run_config.json"));
    CHECK(saved["epochs"] == 1);
    CHECK(saved["pairs"] == 128);
    CHECK(saved["beta"] == 0.3);
    fs::remove_all(out);
    fs::remove(cfg);
  }

  TEST_CASE("analyze writes the csv set") {
    const fs::path out = "cli_analyze_out";
    const Run r = run({"analyze", "--loss", "lrml", "--grid", "2001", "--out", out.string()});
    REQUIRE(r.code == 0);
    for (const char* f : {"stationary.csv", "convexity.csv", "sweep.csv", "run_config.json"}) {
      CHECK(fs::exists(out / f));
    }
    CHECK(slurp(out / "stationary.csv").find("minimum") != std::string::npos);
    fs::remove_all(out);
  }

  TEST_CASE("sweep writes a frontier") {
    const fs::path out = "cli_sweep_out";
    const Run r = run({"sweep", "--loss", "dpo", "--betas", "0.1,0.5", "--seeds", "0", "--epochs",
                       "2", "--pairs", "128", "--threads", "1", "--out", out.string()});
    REQUIRE(r.code == 0);
    const std::string csv = slurp(out / "frontier.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    fs::remove_all(out);
  }

  TEST_CASE("discover with a mock script") {
    const fs::path script = "cli_script.jsonl";
    const fs::path out = "cli_discover_out";
    {
      std::ofstream s(script);
      s << nlohmann::json(nlohmann::json{{"thought", ""},
                                         {"name", "x"},
                                         {"code", disco::dsl::builtin_source(disco::LossId::kCell)}}
                              .dump())
               .dump()
        << "\n";
    }
    const Run r = run({"discover", "--script", script.string(), "--generations", "1", "--epochs",
                       "2", "--pairs", "128", "--out", out.string()});
    REQUIRE(r.code == 0);
    for (const char* f : {"archive.jsonl", "transcript.jsonl", "burn_in.json", "run_config.json"}) {
      CHECK(fs::exists(out / f));
    }
    CHECK(slurp(out / "archive.jsonl").find("\"status\":\"valid\"") != std::string::npos);
    fs::remove_all(out);
    fs::remove(script);
  }

  TEST_CASE("replay subcommand") {
    const Run r = run({"replay", "--script", oracle::data_path("replay_log.jsonl")});
    CHECK(r.code == 0);
    CHECK(r.out.find("replay ok") != std::string::npos);
    const Run p = run({"replay", "--print-prompt"});
    CHECK(p.code == 0);
    CHECK(p.out.find("You are a machine learning researcher") != std::string::npos);
  }
}
