#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "disco/batch_math.hpp"
#include "oracle.hpp"

using namespace disco;

namespace {

BatchVector vec(const Value& v) { return std::get<BatchVector>(v); }

}  // namespace

TEST_SUITE("batch_math") {
  TEST_CASE("scalars broadcast against vectors") {
    const Value out = apply_op(OpCode::kAdd, Value(BatchVector{1.0, 2.0, 3.0}), Value(10.0));
    CHECK(vec(out) == BatchVector{11.0, 12.0, 13.0});
    CHECK(is_scalar(apply_op(OpCode::kMul, Value(2.0), Value(4.0))));
  }

  TEST_CASE("mismatched lengths raise ShapeError") {
    CHECK_THROWS_AS(apply_op(OpCode::kSub, Value(BatchVector{1.0, 2.0}),
                             Value(BatchVector{1.0, 2.0, 3.0})),
                    ShapeError);
  }

  TEST_CASE("logsigmoid is stable at large magnitudes") {
    CHECK(log_sigmoid(800.0) == doctest::Approx(0.0));
    CHECK(log_sigmoid(-800.0) == doctest::Approx(-800.0));
    CHECK(std::isfinite(log_sigmoid(-1e6)));
    CHECK(log_sigmoid(0.0) == doctest::Approx(-std::log(2.0)).epsilon(1e-15));
    CHECK(sigmoid(0.0) == 0.5);
  }

  TEST_CASE("reductions use the unbiased divisor") {
    const BatchVector v{1.0, 2.0, 3.0, 4.0};
    CHECK(reduce(StatKind::kMean, v).value == 2.5);
    CHECK(reduce(StatKind::kVariance, v).value == doctest::Approx(5.0 / 3.0));
    CHECK(reduce(StatKind::kStd, v).value == doctest::Approx(std::sqrt(5.0 / 3.0)));
    CHECK(reduce(StatKind::kVariance, BatchVector{7.0}).value == 0.0);
    CHECK(reduce(StatKind::kStd, BatchVector{7.0}).value == 0.0);
  }

  TEST_CASE("where, min, max and indicators") {
    const Value a(BatchVector{1.0, -2.0, 3.0});
    const Value b(BatchVector{0.0, 0.0, 5.0});
    CHECK(vec(apply_op(OpCode::kIndicatorLt, a, b)) == BatchVector{0.0, 1.0, 1.0});
    CHECK(vec(apply_op(OpCode::kIndicatorGt, a, b)) == BatchVector{1.0, 0.0, 0.0});
    CHECK(vec(apply_op(OpCode::kMin, a, b)) == BatchVector{0.0, -2.0, 3.0});
    CHECK(vec(apply_op(OpCode::kMax, a, b)) == BatchVector{1.0, 0.0, 5.0});
    const Value cond(BatchVector{1.0, 0.0, 1.0});
    CHECK(vec(apply_op(OpCode::kWhere, cond, a, b)) == BatchVector{1.0, 0.0, 3.0});
  }

  TEST_CASE("concat joins in order") {
    const Value out = apply_op(OpCode::kConcat, Value(BatchVector{1.0, 2.0}),
                               Value(BatchVector{3.0}));
    CHECK(vec(out) == BatchVector{1.0, 2.0, 3.0});
  }

  TEST_CASE("first_non_finite reports the index") {
    const BatchVector v{1.0, std::numeric_limits<double>::quiet_NaN(), INFINITY};
    REQUIRE(v.first_non_finite().has_value());
    CHECK(*v.first_non_finite() == 1);
    CHECK_FALSE(BatchVector{1.0, 2.0}.first_non_finite().has_value());
  }

  TEST_CASE("gradient of a composite expression matches finite differences") {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> d(-3.0, 3.0);
    std::vector<double> xs(7);
    for (double& x : xs) x = d(gen);
    const BatchVector x0(xs);

    auto build = [](CompGraph& g, const BatchVector& x) {
      Expr in(g, g.input("x", x));
      Expr s = sigmoid(in) * exp(-0.3 * in) + logsigmoid(in / 2.0) - pow(in, 2.0) * 0.1;
      Expr centered = in - mean(in);
      return s + var(in) * abs(centered) + stddev(in) * log1p(exp(in)) +
             clamp_min(in, -0.5);
    };
    CompGraph g;
    const Expr out = build(g, x0);
    const std::string wrt[] = {"x"};
    const BatchVector grad = g.gradient(out.id(), wrt).at("x");
    const BatchVector fd = finite_diff_gradient(
        [&](const BatchVector& x) {
          CompGraph h;
          return build(h, x).value();
        },
        x0, 1e-6);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      CHECK(grad[i] == doctest::Approx(fd[i]).epsilon(1e-6));
    }
  }

  TEST_CASE("scalar leaves accumulate broadcast gradients") {
    CompGraph g;
    Expr x(g, g.input("x", BatchVector{1.0, 2.0, 3.0}));
    Expr b(g, g.input("b", 2.0));
    const Expr out = b * x;
    const std::string wrt[] = {"b", "x"};
    const auto grads = g.gradient(out.id(), wrt);
    CHECK(grads.at("b") == BatchVector{6.0});
    CHECK(grads.at("x") == BatchVector{2.0, 2.0, 2.0});
  }

  TEST_CASE("kinks take zero subgradients") {
    CompGraph g;
    Expr x(g, g.input("x", BatchVector{0.0, 0.0, 0.0}));
    const Expr out = relu(x) + abs(x) + indicator_lt(x, x.constant(1.0));
    const std::string wrt[] = {"x"};
    CHECK(g.gradient(out.id(), wrt).at("x") == BatchVector{0.0, 0.0, 0.0});
  }

  TEST_CASE("finite_diff_gradient names a non-finite coordinate") {
    auto f = [](const BatchVector& x) -> Value {
      return apply_op(OpCode::kLog, Value(x));
    };
    CHECK_THROWS_AS(finite_diff_gradient(f, BatchVector{1.0, 0.0}, 1e-3),
                    std::domain_error);
  }

  TEST_CASE("unknown gradient leaf is rejected") {
    CompGraph g;
    Expr x(g, g.input("x", BatchVector{1.0}));
    const Expr out = exp(x);
    const std::string wrt[] = {"y"};
    CHECK_THROWS(g.gradient(out.id(), wrt));
  }
}
