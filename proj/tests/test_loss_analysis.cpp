#include <doctest.h>

#include <cmath>
#include <sstream>

#include "disco/loss_analysis.hpp"
#include "oracle.hpp"

using namespace disco;

TEST_SUITE("loss_analysis") {
  TEST_CASE("lrml stationary points match the frozen oracle") {
    const auto doc = oracle::load_json("loss_oracle.json");
    const auto pts = find_stationary_points(LossId::kLrml, {}, -10.0, 10.0);
    REQUIRE(pts.size() == 2);
    CHECK(pts[0].kind == StationaryPoint::Kind::kMinimum);
    CHECK(pts[1].kind == StationaryPoint::Kind::kMaximum);
    CHECK(pts[0].rho == doctest::Approx(doc["lrml_stationary"][0].get<double>()).epsilon(1e-8));
    CHECK(pts[1].rho == doctest::Approx(doc["lrml_stationary"][1].get<double>()).epsilon(1e-8));
    CHECK(pts[0].value ==
          doctest::Approx(doc["lrml_stationary_values"][0].get<double>()).epsilon(1e-12));
    CHECK(pts[1].value ==
          doctest::Approx(doc["lrml_stationary_values"][1].get<double>()).epsilon(1e-12));
  }

  TEST_CASE("monotone losses have no stationary points") {
    for (LossId id : {LossId::kDpo, LossId::kExp, LossId::kCell}) {
      CHECK(find_stationary_points(id, {}, -10.0, 10.0).empty());
    }
  }

  TEST_CASE("ipo minimum sits at 1/(2 beta)") {
    const auto pts = find_stationary_points(LossId::kIpo, {0.1}, -10.0, 10.0);
    REQUIRE(pts.size() == 1);
    CHECK(pts[0].kind == StationaryPoint::Kind::kMinimum);
    CHECK(pts[0].rho == doctest::Approx(5.0).epsilon(1e-9));
  }

  TEST_CASE("stationary points move with beta when corrected") {
    const auto a = find_stationary_points(LossId::kLrml, {0.05}, -10.0, 10.0);
    const auto b = find_stationary_points(LossId::kLrml, {0.1}, -10.0, 10.0);
    REQUIRE(a.size() == 2);
    REQUIRE(b.size() == 2);
    CHECK(b[0].rho == doctest::Approx(a[0].rho / 2.0).epsilon(1e-6));
  }

  TEST_CASE("convexity profiles") {
    const auto lrml = convexity_profile(LossId::kLrml, {}, -10.0, 10.0);
    bool pos = false, neg = false;
    for (const auto& s : lrml) {
      pos |= s.sign > 0;
      neg |= s.sign < 0;
    }
    CHECK(pos);
    CHECK(neg);
    const auto dpo = convexity_profile(LossId::kDpo, {}, -10.0, 10.0);
    REQUIRE(dpo.size() == 1);
    CHECK(dpo[0].sign == 1);
    CHECK(dpo[0].lo == -10.0);
    CHECK(dpo[0].hi == 10.0);
  }

  TEST_CASE("segments tile the interval") {
    const auto segs = convexity_profile(LossId::kLrml, {}, -10.0, 10.0, 2001);
    REQUIRE_FALSE(segs.empty());
    CHECK(segs.front().lo == -10.0);
    CHECK(segs.back().hi == 10.0);
    for (std::size_t i = 1; i < segs.size(); ++i) {
      CHECK(segs[i].lo >= segs[i - 1].hi);
      CHECK(segs[i].sign != segs[i - 1].sign);
    }
  }

  TEST_CASE("linspace endpoints are exact") {
    const auto v = linspace(-1.0, 1.0, 5);
    CHECK(v == std::vector<double>{-1.0, -0.5, 0.0, 0.5, 1.0});
    CHECK(linspace(2.0, 3.0, 1) == std::vector<double>{2.0});
  }

  TEST_CASE("sweep table is beta-major") {
    const double betas[] = {0.05, 0.5};
    const double rhos[] = {-1.0, 0.0, 1.0};
    const auto rows = beta_sweep_table(LossId::kDpo, betas, rhos, Variant::kBetaCorrected);
    REQUIRE(rows.size() == 6);
    CHECK(rows[0].beta == 0.05);
    CHECK(rows[3].beta == 0.5);
    CHECK(rows[4].rho == 0.0);
    CHECK(rows[4].value == doctest::Approx(std::log(2.0)));
    CHECK(rows[4].derivative == doctest::Approx(-0.25));
    const std::string csv = sweep_csv(LossId::kDpo, Variant::kBetaCorrected, rows);
    std::istringstream in(csv);
    std::string header;
    std::getline(in, header);
    CHECK(header == "loss_id,variant,beta,rho,f,df_drho");
    std::size_t lines = 0;
    for (std::string l; std::getline(in, l);) ++lines;
    CHECK(lines == 6);
  }

  TEST_CASE("csv headers") {
    const auto segs = convexity_profile(LossId::kDpo, {}, -1.0, 1.0, 101);
    CHECK(convexity_csv(LossId::kDpo, {}, segs).rfind("loss_id,variant,beta,rho_lo,rho_hi,sign\n", 0) ==
          0);
    const auto pts = find_stationary_points(LossId::kLrml, {}, -10.0, 10.0);
    const std::string s = stationary_csv(LossId::kLrml, {}, pts);
    CHECK(s.rfind("loss_id,variant,beta,rho,f,kind\n", 0) == 0);
    CHECK(s.find("minimum") != std::string::npos);
    CHECK(s.find("maximum") != std::string::npos);
  }

  TEST_CASE("sample region fraction") {
    CHECK(sample_region_fraction(BatchVector{-3.0, -1.0, 0.0, 2.0}, -2.4, 1.5) == 0.5);
    CHECK_THROWS(sample_region_fraction(BatchVector{}, 0.0, 1.0));
  }
}
