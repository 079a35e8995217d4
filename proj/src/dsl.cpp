#include "disco/dsl.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

#include "dsl_lexer.hpp"

namespace disco::dsl {

namespace {

// Static shape: a scalar, or a vector of `multiple` * N entries.
struct Shape {
  int multiple = 0;  // 0 for scalars

  bool scalar() const { return multiple == 0; }
};

std::string describe(Shape s) {
  if (s.scalar()) return "a scalar";
  if (s.multiple == 1) return "a vector of length N";
  return "a vector of length " + std::to_string(s.multiple) + "N";
}

struct TypeError {
  ParseDiagnostic diag;
};

[[noreturn]] void type_fail(const AstNode& at, std::string message,
                            DiagnosticKind kind = DiagnosticKind::kType) {
  throw TypeError{ParseDiagnostic{at.pos, std::move(message), kind}};
}

bool numeric_literal(const AstNode& n) {
  if (n.kind == AstNode::Kind::kNumber) return true;
  return n.kind == AstNode::Kind::kNeg && n.args[0]->kind == AstNode::Kind::kNumber;
}

class ShapeChecker {
 public:
  Shape check(const AstNode& n) {
    switch (n.kind) {
      case AstNode::Kind::kNumber:
        return {};
      case AstNode::Kind::kIdent:
        return ident(n);
      case AstNode::Kind::kNeg:
        return check(*n.args[0]);
      case AstNode::Kind::kBinary: {
        const Shape a = check(*n.args[0]);
        const Shape b = check(*n.args[1]);
        return combine(n, a, b, std::string("'") + n.op + "'");
      }
      case AstNode::Kind::kCall:
        return call(n);
    }
    return {};
  }

  void bind(const std::string& name, Shape s) { bound_[name] = s; }

 private:
  Shape ident(const AstNode& n) const {
    if (n.name == "beta") return {};
    if (is_leaf_name(n.name)) return {1};
    auto it = bound_.find(n.name);
    if (it == bound_.end()) {
      type_fail(n, "unbound name '" + n.name + "'", DiagnosticKind::kUnboundName);
    }
    return it->second;
  }

  static Shape combine(const AstNode& at, Shape a, Shape b, const std::string& what) {
    if (a.scalar()) return b;
    if (b.scalar() || a.multiple == b.multiple) return a;
    type_fail(at, "operands of " + what + " have mismatched shapes: " + describe(a) +
                      " and " + describe(b));
  }

  Shape call(const AstNode& n) {
    const auto op = function_op(n.name);
    if (!op) {
      type_fail(n, "unknown function '" + n.name + "'", DiagnosticKind::kUnboundName);
    }
    const std::size_t want = arity(*op);
    if (n.args.size() != want) {
      type_fail(n,
                "'" + n.name + "' takes " + std::to_string(want) + " argument" +
                    (want == 1 ? "" : "s") + ", got " + std::to_string(n.args.size()),
                DiagnosticKind::kArity);
    }
    std::vector<Shape> shapes;
    for (const auto& a : n.args) shapes.push_back(check(*a));
    const std::string what = "'" + n.name + "'";
    switch (*op) {
      case OpCode::kMean:
      case OpCode::kVar:
      case OpCode::kStd:
        if (shapes[0].scalar()) {
          type_fail(n, what + " reduces a vector but was given a scalar");
        }
        return {};
      case OpCode::kPow:
        if (!numeric_literal(*n.args[1])) {
          type_fail(*n.args[1], "the exponent of 'pow' must be a numeric literal");
        }
        return shapes[0];
      case OpCode::kClampMin:
        if (!shapes[1].scalar()) {
          type_fail(*n.args[1], "the lower bound of 'clamp_min' must be a scalar");
        }
        return shapes[0];
      case OpCode::kConcat:
        if (shapes[0].scalar() || shapes[1].scalar()) {
          type_fail(n, "'concat' joins two vectors but was given " +
                           describe(shapes[0].scalar() ? shapes[0] : shapes[1]));
        }
        return {shapes[0].multiple + shapes[1].multiple};
      default: {
        Shape out = shapes[0];
        for (std::size_t i = 1; i < shapes.size(); ++i) {
          out = combine(n, out, shapes[i], what);
        }
        return out;
      }
    }
  }

  std::map<std::string, Shape> bound_;
};

class Builder {
 public:
  explicit Builder(const LossInputs& in) : in_(in) {}

  void bind(const std::string& name, Expr e) { bound_.insert_or_assign(name, e); }

  Expr build(const AstNode& n) {
    switch (n.kind) {
      case AstNode::Kind::kNumber:
        return in_.beta.constant(n.number);
      case AstNode::Kind::kIdent:
        return ident(n.name);
      case AstNode::Kind::kNeg:
        return -build(*n.args[0]);
      case AstNode::Kind::kBinary: {
        const Expr a = build(*n.args[0]);
        const Expr b = build(*n.args[1]);
        switch (n.op) {
          case '+': return a + b;
          case '-': return a - b;
          case '*': return a * b;
          default: return a / b;
        }
      }
      case AstNode::Kind::kCall: {
        const auto op = function_op(n.name);
        if (!op) throw std::invalid_argument("unknown function '" + n.name + "'");
        std::vector<CompGraph::NodeId> ids;
        for (const auto& a : n.args) ids.push_back(build(*a).id());
        CompGraph& g = in_.beta.graph();
        return {g, g.apply(*op, ids)};
      }
    }
    throw std::logic_error("unknown AST node");
  }

 private:
  Expr ident(const std::string& name) const {
    if (name == "pcl") return in_.pcl;
    if (name == "prl") return in_.prl;
    if (name == "rcl") return in_.rcl;
    if (name == "rrl") return in_.rrl;
    if (name == "beta") return in_.beta;
    auto it = bound_.find(name);
    if (it == bound_.end()) throw std::invalid_argument("unbound name '" + name + "'");
    return it->second;
  }

  const LossInputs& in_;
  std::map<std::string, Expr> bound_;
};

void require_checked(const ObjectiveProgram& program) {
  if (auto diag = check_program(program)) {
    throw std::invalid_argument(diag->to_string());
  }
}

void check_beta(double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw std::invalid_argument("beta must be a positive finite number");
  }
}

BatchVector finite_result(const Value& v) {
  BatchVector out = std::get<BatchVector>(v);
  if (auto bad = out.first_non_finite()) {
    throw FiniteViolation("objective", *bad, out[*bad]);
  }
  return out;
}

std::string replace_all(std::string text, std::string_view key, std::string_view value) {
  for (std::size_t at = text.find(key); at != std::string::npos;
       at = text.find(key, at + value.size())) {
    text.replace(at, key.size(), value);
  }
  return text;
}

}  // namespace

std::optional<ParseDiagnostic> check_program(const ObjectiveProgram& program) {
  try {
    ShapeChecker checker;
    for (const auto& b : program.bindings) checker.bind(b.name, checker.check(*b.expr));
    const Shape result = checker.check(*program.result);
    if (result.scalar()) {
      type_fail(*program.result,
                "Expected loss shape to be per input (e.g. (N,)), got a scalar; "
                "per-input shape required");
    }
    if (result.multiple > 2) {
      type_fail(*program.result,
                "Expected loss shape to be per input (N or 2N entries), got " +
                    describe(result));
    }
  } catch (const TypeError& e) {
    return e.diag;
  }
  return std::nullopt;
}

ObjectiveProgram compile(std::string_view source) {
  ParseResult parsed = parse_program(source);
  if (auto* diag = std::get_if<ParseDiagnostic>(&parsed)) {
    throw std::invalid_argument(diag->to_string());
  }
  ObjectiveProgram program = std::get<ObjectiveProgram>(std::move(parsed));
  require_checked(program);
  return program;
}

Expr build_program(const ObjectiveProgram& program, const LossInputs& inputs) {
  Builder builder(inputs);
  for (const auto& b : program.bindings) builder.bind(b.name, builder.build(*b.expr));
  return builder.build(*program.result);
}

BatchVector eval_program(const ObjectiveProgram& program, const PreferenceBatch& batch,
                         double beta) {
  require_checked(program);
  check_beta(beta);
  CompGraph graph;
  const LossInputs in = add_batch_inputs(graph, batch, beta);
  return finite_result(build_program(program, in).value());
}

ProgramGradient grad_program(const ObjectiveProgram& program,
                             const PreferenceBatch& batch, double beta) {
  require_checked(program);
  check_beta(beta);
  CompGraph graph;
  const LossInputs in = add_batch_inputs(graph, batch, beta);
  const Expr losses = build_program(program, in);
  BatchVector values = finite_result(losses.value());
  const Expr total = mean(losses);
  const std::string wrt[] = {"pcl", "prl"};
  auto grads = graph.gradient(total.id(), wrt);
  ProgramGradient out{std::move(values), std::get<double>(total.value()),
                      std::move(grads.at("pcl")), std::move(grads.at("prl"))};
  for (const BatchVector* g : {&out.d_policy_chosen, &out.d_policy_rejected}) {
    if (auto bad = g->first_non_finite()) {
      throw FiniteViolation("objective gradient", *bad, (*g)[*bad]);
    }
  }
  return out;
}

std::string builtin_source(LossId id, Variant variant) {
  const bool corrected = variant == Variant::kBetaCorrected;
  const std::string logits = "let logits = (pcl - prl) - (rcl - rrl)\n";
  // {z}: the logits as they enter intermediate statistics.
  const std::string zdef = corrected ? "let z = beta * logits / 0.05\n" : "";
  const std::string z = corrected ? "z" : "logits";
  std::string body;
  switch (id) {
    case LossId::kDpo:
      return logits + "-logsigmoid(beta * logits)";
    case LossId::kSlic:
      return logits + "relu(1 - beta * logits)";
    case LossId::kExp:
      return logits + "exp(-beta * logits)";
    case LossId::kIpo:
      return logits + "pow(logits - 1 / (2 * beta), 2)";
    case LossId::kKtoPair:
      return "let chosen_logratios = pcl - rcl\n"
             "let rejected_logratios = prl - rrl\n"
             "let chosen_kl = clamp_min(mean(chosen_logratios), 0)\n"
             "let rejected_kl = clamp_min(mean(rejected_logratios), 0)\n"
             "concat(1 - sigmoid(beta * (chosen_logratios - rejected_kl)), "
             "1 - sigmoid(beta * (chosen_kl - rejected_logratios)))";
    case LossId::kDbaql:
      body = "let blend = sigmoid(var({z})) * 1\n"
             "let logistic = -logsigmoid(beta * logits / 0.9)\n"
             "let exp_losses = exp(-beta * logits * 0.9)\n"
             "blend * logistic + (1 - blend) * exp_losses";
      break;
    case LossId::kAql:
      body = std::string("let moving_quantile = 0.5 + 0.01 * (sigmoid(mean({z})) - 0.5)\n") +
             (corrected ? "let q = sigmoid(0.05 * moving_quantile - beta * logits)\n"
                        : "let q = sigmoid(-beta * (logits - moving_quantile))\n") +
             "let logistic = -logsigmoid(beta * logits)\n"
             "let hinge = relu(1 - beta * logits)\n"
             "q * logistic + (1 - q) * hinge";
      break;
    case LossId::kPadll:
      return logits +
             "let mismatches = indicator_lt(logits, 0)\n"
             "let adaptive_decay = 0.9 * (1 - mismatches * 0.5)\n"
             "adaptive_decay * -logsigmoid(beta * logits)";
    case LossId::kAqfl:
      body = "let m1 = std({z}) * mean(sigmoid(-{z}))\n"
             "let m2 = m1 + 0.05 * (sigmoid(mean({z})) - m1)\n"
             "let distance = abs({z} - m2)\n"
             "let r = sigmoid(0.1 * distance)\n"
             "let logistic = -logsigmoid(beta * logits)\n"
             "let hinge = relu(1 - beta * logits)\n"
             "r * logistic + (1 - r) * hinge";
      break;
    case LossId::kCell:
      return logits +
             "let exp_losses = exp(-beta * logits)\n"
             "let log_losses = -logsigmoid(beta * logits)\n"
             "0.5 * exp_losses + (1 - 0.5) * log_losses";
    case LossId::kLrml:
      body = "let modulation = sigmoid({z})\n"
             "let logistic = -logsigmoid(beta * logits)\n"
             "let exp_component = exp(-beta * logits)\n"
             "logistic * (1 - modulation) + exp_component * modulation";
      break;
    case LossId::kPfl:
      body = "let is_correct = indicator_gt(pcl, prl)\n"
             "where(is_correct, -logsigmoid({z}) / 2, relu(1 - {z}) * 2)";
      break;
    default:
      throw std::invalid_argument("unknown loss id");
  }
  return logits + zdef + replace_all(body, "{z}", z);
}

}  // namespace disco::dsl
