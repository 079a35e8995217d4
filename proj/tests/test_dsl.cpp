#include <doctest.h>

#include <random>

#include "disco/dsl.hpp"
#include "oracle.hpp"

using namespace disco;
using namespace disco::dsl;

namespace {

ParseDiagnostic diag_of(std::string_view src) {
  ParseResult r = parse_program(src);
  if (auto* d = std::get_if<ParseDiagnostic>(&r)) return *d;
  auto c = check_program(std::get<ObjectiveProgram>(r));
  REQUIRE(c.has_value());
  return *c;
}

bool accepts(std::string_view src) {
  ParseResult r = parse_program(src);
  if (std::holds_alternative<ParseDiagnostic>(r)) return false;
  return !check_program(std::get<ObjectiveProgram>(r)).has_value();
}

constexpr LossId kAll[] = {LossId::kDpo,   LossId::kSlic,  LossId::kExp,   LossId::kIpo,
                           LossId::kKtoPair, LossId::kDbaql, LossId::kAql,  LossId::kPadll,
                           LossId::kAqfl,  LossId::kCell,  LossId::kLrml,  LossId::kPfl};

}  // namespace

TEST_SUITE("dsl") {
  TEST_CASE("bindings, comments and continuation lines") {
    const std::string src =
        "# comment\n"
        "let a = pcl - prl   # trailing\n"
        "let b = (a -\n"
        "         (rcl - rrl))\n"
        "-logsigmoid(beta * b)\n";
    CHECK(accepts(src));
    const ObjectiveProgram p = compile(src);
    CHECK(p.bindings.size() == 2);
    CHECK(p.bindings[1].name == "b");
  }

  TEST_CASE("precedence and unary minus") {
    const ObjectiveProgram p = compile("pcl - prl * 2 + -rcl / 4");
    CHECK(render(p) == "pcl - prl * 2 + -rcl / 4");
    const ObjectiveProgram q = compile("(pcl - prl) * 2");
    CHECK(render(q) == "(pcl - prl) * 2");
    const ObjectiveProgram r = compile("pcl - (prl - rcl)");
    CHECK(render(r) == "pcl - (prl - rcl)");
  }

  TEST_CASE("render round-trips every builtin") {
    for (LossId id : kAll) {
      for (Variant v : {Variant::kAsDiscovered, Variant::kBetaCorrected}) {
        const ObjectiveProgram p = compile(builtin_source(id, v));
        const std::string once = render(p);
        const ObjectiveProgram p2 = compile(once);
        CHECK(same_structure(p, p2));
        CHECK(render(p2) == once);
      }
    }
  }

  TEST_CASE("diagnostics carry kind and position") {
    auto d = diag_of("pcl $ prl");
    CHECK(d.kind == DiagnosticKind::kLex);
    CHECK(d.pos.line == 1);
    CHECK(d.pos.column == 5);

    d = diag_of("let x = pcl\nfoo(x)");
    CHECK(d.kind == DiagnosticKind::kUnboundName);
    CHECK(d.pos.line == 2);

    d = diag_of("pcl - q");
    CHECK(d.kind == DiagnosticKind::kUnboundName);
    CHECK(d.to_string() == "line 1, column 7: unbound-name error: unbound name 'q'");

    CHECK(diag_of("exp(pcl, prl)").kind == DiagnosticKind::kArity);
    CHECK(diag_of("exp()").kind == DiagnosticKind::kArity);
    CHECK(diag_of("(pcl - prl").kind == DiagnosticKind::kSyntax);
    CHECK(diag_of("--pcl").kind == DiagnosticKind::kSyntax);
    CHECK(diag_of("let beta = pcl\nbeta").kind == DiagnosticKind::kSyntax);
    CHECK(diag_of("let a = pcl\nlet a = prl\na").kind == DiagnosticKind::kSyntax);
    CHECK(diag_of("let a = pcl\n").kind == DiagnosticKind::kSyntax);
    CHECK(diag_of("").kind == DiagnosticKind::kSyntax);
    CHECK(diag_of("1.2.3").kind == DiagnosticKind::kSyntax);
    CHECK(diag_of("pcl * 1e+").kind == DiagnosticKind::kLex);
  }

  TEST_CASE("shape rules") {
    const auto scalar = diag_of("mean(pcl - prl)");
    CHECK(scalar.kind == DiagnosticKind::kType);
    CHECK(scalar.message ==
          "Expected loss shape to be per input (e.g. (N,)), got a scalar; per-input shape "
          "required");
    CHECK(diag_of("beta * 2").kind == DiagnosticKind::kType);
    CHECK(diag_of("mean(beta)").kind == DiagnosticKind::kType);
    CHECK(diag_of("pow(pcl, prl)").kind == DiagnosticKind::kType);
    CHECK(diag_of("clamp_min(pcl, prl)").kind == DiagnosticKind::kType);
    CHECK(diag_of("concat(pcl, prl) + pcl").kind == DiagnosticKind::kType);
    CHECK(diag_of("concat(concat(pcl, prl), rcl)").kind == DiagnosticKind::kType);
    CHECK(accepts("pow(pcl, -2)"));
    CHECK(accepts("clamp_min(pcl, mean(prl))"));
    CHECK(accepts("concat(pcl, prl) * beta"));
  }

  TEST_CASE("deep nesting and size limits fail cleanly") {
    std::string deep(500, '(');
    deep += "pcl" + std::string(500, ')');
    CHECK(diag_of(deep).kind == DiagnosticKind::kSyntax);
    std::string big = "pcl";
    while (big.size() <= 70000) big += " + pcl";
    CHECK(diag_of(big).kind == DiagnosticKind::kLex);
  }

  TEST_CASE("parse is total on junk input") {
    std::mt19937_64 gen(17);
    const std::string alphabet = "pclrbeta()+-*/,=#\n 0123456789.elgxmso_";
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    std::uniform_int_distribution<std::size_t> len(0, 60);
    for (int i = 0; i < 2000; ++i) {
      std::string s;
      for (std::size_t k = len(gen); k > 0; --k) s += alphabet[pick(gen)];
      ParseResult r = parse_program(s);
      if (auto* p = std::get_if<ObjectiveProgram>(&r)) (void)check_program(*p);
    }
  }

  TEST_CASE("builtins match the native catalog") {
    std::mt19937_64 gen(23);
    for (int trial = 0; trial < 10; ++trial) {
      const PreferenceBatch b = oracle::random_batch(gen, 32);
      for (LossId id : kAll) {
        for (Variant v : {Variant::kAsDiscovered, Variant::kBetaCorrected}) {
          for (double beta : {0.05, 0.3}) {
            const BatchVector native = eval_loss_batch(id, {beta, v}, b);
            const BatchVector dsl = eval_program(compile(builtin_source(id, v)), b, beta);
            INFO(loss_name(id), " ", variant_name(v), " ", beta);
            CHECK(oracle::max_abs_diff(native, dsl) <= 1e-12);
          }
        }
      }
    }
  }

  TEST_CASE("program gradients match finite differences") {
    std::mt19937_64 gen(29);
    const PreferenceBatch b = oracle::random_batch(gen, 8, -4.0, -0.5);
    const ObjectiveProgram p = compile(builtin_source(LossId::kLrml));
    const ProgramGradient g = grad_program(p, b, 0.1);
    auto mean_of = [&](const PreferenceBatch& x) {
      const BatchVector v = eval_program(p, x, 0.1);
      double s = 0.0;
      for (double e : v.values()) s += e;
      return s / static_cast<double>(v.size());
    };
    CHECK(g.mean_loss == doctest::Approx(mean_of(b)).epsilon(1e-14));
    const double h = 1e-6;
    for (std::size_t i = 0; i < b.size(); ++i) {
      auto bump = [&](double d) {
        PreferenceBatch x = b;
        auto v = x.policy_chosen_logps.data();
        v[i] += d;
        x.policy_chosen_logps = BatchVector(v);
        return mean_of(x);
      };
      const double fd = (bump(h) - bump(-h)) / (2 * h);
      CHECK(g.d_policy_chosen[i] == doctest::Approx(fd).epsilon(1e-6));
    }
  }

  TEST_CASE("non-finite results raise FiniteViolation") {
    PreferenceBatch b;
    b.policy_chosen_logps = {-1.0, -2.0};
    b.policy_rejected_logps = {-1.0, -2.0};
    b.reference_chosen_logps = {-1.0, -2.0};
    b.reference_rejected_logps = {-1.0, -2.0};
    CHECK_THROWS_AS(eval_program(compile("log(pcl - prl)"), b, 0.1), FiniteViolation);
    CHECK_THROWS_AS(compile("mean(pcl)"), std::invalid_argument);
  }
}
