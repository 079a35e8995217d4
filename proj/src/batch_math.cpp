#include "disco/batch_math.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "disco/text_format.hpp"

namespace disco {

std::optional<std::size_t> BatchVector::first_non_finite() const {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) return i;
  }
  return std::nullopt;
}

bool is_scalar(const Value& v) { return std::holds_alternative<double>(v); }

std::size_t value_length(const Value& v) {
  return is_scalar(v) ? 1 : std::get<BatchVector>(v).size();
}

double element(const Value& v, std::size_t i) {
  if (const double* s = std::get_if<double>(&v)) return *s;
  return std::get<BatchVector>(v)[i];
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid(double x) {
  return std::min(0.0, x) - std::log1p(std::exp(-std::abs(x)));
}

namespace {

struct OpInfo {
  OpCode op;
  std::string_view name;
  std::size_t arity;
};

constexpr OpInfo kOps[] = {
    {OpCode::kAdd, "add", 2},
    {OpCode::kSub, "sub", 2},
    {OpCode::kMul, "mul", 2},
    {OpCode::kDiv, "div", 2},
    {OpCode::kNeg, "neg", 1},
    {OpCode::kExp, "exp", 1},
    {OpCode::kLog, "log", 1},
    {OpCode::kLog1p, "log1p", 1},
    {OpCode::kSigmoid, "sigmoid", 1},
    {OpCode::kLogSigmoid, "logsigmoid", 1},
    {OpCode::kRelu, "relu", 1},
    {OpCode::kAbs, "abs", 1},
    {OpCode::kPow, "pow", 2},
    {OpCode::kClampMin, "clamp_min", 2},
    {OpCode::kMin, "min", 2},
    {OpCode::kMax, "max", 2},
    {OpCode::kIndicatorLt, "indicator_lt", 2},
    {OpCode::kIndicatorGt, "indicator_gt", 2},
    {OpCode::kWhere, "where", 3},
    {OpCode::kConcat, "concat", 2},
    {OpCode::kMean, "mean", 1},
    {OpCode::kVar, "var", 1},
    {OpCode::kStd, "std", 1},
};

const OpInfo& info(OpCode op) {
  for (const auto& entry : kOps) {
    if (entry.op == op) return entry;
  }
  throw std::logic_error("unknown op code");
}

double unary(OpCode op, double x) {
  switch (op) {
    case OpCode::kNeg: return -x;
    case OpCode::kExp: return std::exp(x);
    case OpCode::kLog: return std::log(x);
    case OpCode::kLog1p: return std::log1p(x);
    case OpCode::kSigmoid: return sigmoid(x);
    case OpCode::kLogSigmoid: return log_sigmoid(x);
    case OpCode::kRelu: return x > 0.0 ? x : 0.0;
    case OpCode::kAbs: return std::abs(x);
    default: throw std::logic_error("not a unary op");
  }
}

double binary(OpCode op, double a, double b) {
  switch (op) {
    case OpCode::kAdd: return a + b;
    case OpCode::kSub: return a - b;
    case OpCode::kMul: return a * b;
    case OpCode::kDiv: return a / b;
    case OpCode::kPow: return std::pow(a, b);
    case OpCode::kClampMin: return a > b ? a : b;
    case OpCode::kMin: return a <= b ? a : b;
    case OpCode::kMax: return a >= b ? a : b;
    case OpCode::kIndicatorLt: return a < b ? 1.0 : 0.0;
    case OpCode::kIndicatorGt: return a > b ? 1.0 : 0.0;
    default: throw std::logic_error("not a binary op");
  }
}

// Common length of broadcast operands, or 0 if all are scalars.
std::size_t broadcast_length(OpCode op, std::span<const Value> operands) {
  std::size_t n = 0;
  for (const auto& v : operands) {
    if (is_scalar(v)) continue;
    const std::size_t len = std::get<BatchVector>(v).size();
    if (n == 0) {
      n = len;
    } else if (n != len) {
      throw ShapeError(std::string(op_name(op)) + ": length mismatch (" +
                       std::to_string(n) + " vs " + std::to_string(len) + ")");
    }
  }
  return n;
}

double fold_sum(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s;
}

double mean_of(std::span<const double> xs) {
  return fold_sum(xs) / static_cast<double>(xs.size());
}

double var_of(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size() - 1);
}

const BatchVector& require_vector(OpCode op, const Value& v) {
  if (is_scalar(v)) {
    throw ShapeError(std::string(op_name(op)) + " expects a per-input vector");
  }
  return std::get<BatchVector>(v);
}

std::vector<double> as_elements(const Value& v) {
  if (is_scalar(v)) return {std::get<double>(v)};
  return std::get<BatchVector>(v).data();
}

}  // namespace

std::size_t arity(OpCode op) { return info(op).arity; }
std::string_view op_name(OpCode op) { return info(op).name; }

bool is_reduction(OpCode op) {
  return op == OpCode::kMean || op == OpCode::kVar || op == OpCode::kStd;
}

Value apply_op(OpCode op, std::span<const Value> operands) {
  if (operands.size() != arity(op)) {
    throw std::invalid_argument(std::string(op_name(op)) + " expects " +
                                std::to_string(arity(op)) + " operands");
  }
  if (is_reduction(op)) {
    const auto& a = require_vector(op, operands[0]);
    switch (op) {
      case OpCode::kMean: return mean_of(a.values());
      case OpCode::kVar: return var_of(a.values());
      default: return std::sqrt(var_of(a.values()));
    }
  }
  if (op == OpCode::kConcat) {
    std::vector<double> out = as_elements(operands[0]);
    const auto tail = as_elements(operands[1]);
    out.insert(out.end(), tail.begin(), tail.end());
    return BatchVector(std::move(out));
  }

  const std::size_t n = broadcast_length(op, operands);
  auto at = [&](std::size_t k, std::size_t i) { return element(operands[k], i); };
  auto compute = [&](std::size_t i) {
    switch (operands.size()) {
      case 1: return unary(op, at(0, i));
      case 2: return binary(op, at(0, i), at(1, i));
      default: return at(0, i) != 0.0 ? at(1, i) : at(2, i);
    }
  };
  if (n == 0) return compute(0);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = compute(i);
  return BatchVector(std::move(out));
}

Value apply_op(OpCode op, const Value& a) {
  const Value args[] = {a};
  return apply_op(op, args);
}

Value apply_op(OpCode op, const Value& a, const Value& b) {
  const Value args[] = {a, b};
  return apply_op(op, args);
}

Value apply_op(OpCode op, const Value& a, const Value& b, const Value& c) {
  const Value args[] = {a, b, c};
  return apply_op(op, args);
}

ScalarStat reduce(StatKind stat, const BatchVector& a) {
  if (a.empty()) throw ShapeError("reduce: empty vector");
  switch (stat) {
    case StatKind::kMean: return {mean_of(a.values()), stat};
    case StatKind::kVariance: return {var_of(a.values()), stat};
    case StatKind::kStd: return {std::sqrt(var_of(a.values())), stat};
  }
  throw std::logic_error("unknown stat");
}

// ---------------------------------------------------------------------------
// CompGraph

CompGraph::NodeId CompGraph::input(std::string name, Value value) {
  if (find_input(name)) throw std::invalid_argument("duplicate input: " + name);
  nodes_.push_back(Node{std::nullopt, {}, std::move(value), std::move(name)});
  return nodes_.size() - 1;
}

CompGraph::NodeId CompGraph::constant(double value) {
  nodes_.push_back(Node{std::nullopt, {}, value, {}});
  return nodes_.size() - 1;
}

CompGraph::NodeId CompGraph::apply(OpCode op,
                                   std::initializer_list<NodeId> operands) {
  return apply(op, std::span<const NodeId>(operands.begin(), operands.size()));
}

CompGraph::NodeId CompGraph::apply(OpCode op, std::span<const NodeId> operands) {
  std::vector<Value> args;
  args.reserve(operands.size());
  for (NodeId id : operands) {
    if (id >= nodes_.size()) throw std::out_of_range("operand node id");
    args.push_back(nodes_[id].value);
  }
  Value out = apply_op(op, args);
  nodes_.push_back(Node{op, {operands.begin(), operands.end()}, std::move(out), {}});
  return nodes_.size() - 1;
}

std::optional<CompGraph::NodeId> CompGraph::find_input(std::string_view name) const {
  for (NodeId i = 0; i < nodes_.size(); ++i) {
    if (!nodes_[i].op && !nodes_[i].name.empty() && nodes_[i].name == name) {
      return i;
    }
  }
  return std::nullopt;
}

namespace {

// Adds per-element contribution g_i into an adjoint buffer, summing over the
// batch when the operand was a broadcast scalar.
void accumulate(std::vector<double>& adj, std::size_t i, double g) {
  if (adj.size() == 1) {
    adj[0] += g;
  } else {
    adj[i] += g;
  }
}

}  // namespace

std::map<std::string, BatchVector> CompGraph::gradient(
    NodeId output, std::span<const std::string> wrt) const {
  if (output >= nodes_.size()) throw std::out_of_range("output node id");
  std::vector<std::vector<double>> adj(nodes_.size());
  for (NodeId i = 0; i <= output; ++i) {
    adj[i].assign(value_length(nodes_[i].value), 0.0);
  }
  std::fill(adj[output].begin(), adj[output].end(), 1.0);

  for (NodeId k = output + 1; k-- > 0;) {
    const Node& node = nodes_[k];
    if (!node.op) continue;
    const std::vector<double>& g = adj[k];
    bool any = false;
    for (double x : g) any = any || x != 0.0;
    if (!any) continue;

    const OpCode op = *node.op;
    const auto& ids = node.operands;
    auto val = [&](std::size_t j, std::size_t i) {
      return element(nodes_[ids[j]].value, i);
    };
    auto out = [&](std::size_t i) { return element(node.value, i); };
    const std::size_t n = g.size();

    if (is_reduction(op)) {
      const auto& a = std::get<BatchVector>(nodes_[ids[0]].value);
      const std::size_t len = a.size();
      const double m = mean_of(a.values());
      const double s = g[0];
      for (std::size_t i = 0; i < len; ++i) {
        double d = 0.0;
        if (op == OpCode::kMean) {
          d = 1.0 / static_cast<double>(len);
        } else if (len >= 2) {
          const double dvar = 2.0 * (a[i] - m) / static_cast<double>(len - 1);
          if (op == OpCode::kVar) {
            d = dvar;
          } else {
            const double sd = std::get<double>(node.value);
            d = sd > 0.0 ? dvar / (2.0 * sd) : 0.0;
          }
        }
        adj[ids[0]][i] += s * d;
      }
      continue;
    }

    if (op == OpCode::kConcat) {
      const std::size_t na = value_length(nodes_[ids[0]].value);
      for (std::size_t i = 0; i < n; ++i) {
        if (i < na) {
          adj[ids[0]][i] += g[i];
        } else {
          adj[ids[1]][i - na] += g[i];
        }
      }
      continue;
    }

    for (std::size_t i = 0; i < n; ++i) {
      const double gi = g[i];
      if (gi == 0.0) continue;
      switch (op) {
        case OpCode::kAdd:
          accumulate(adj[ids[0]], i, gi);
          accumulate(adj[ids[1]], i, gi);
          break;
        case OpCode::kSub:
          accumulate(adj[ids[0]], i, gi);
          accumulate(adj[ids[1]], i, -gi);
          break;
        case OpCode::kMul:
          accumulate(adj[ids[0]], i, gi * val(1, i));
          accumulate(adj[ids[1]], i, gi * val(0, i));
          break;
        case OpCode::kDiv: {
          const double b = val(1, i);
          accumulate(adj[ids[0]], i, gi / b);
          accumulate(adj[ids[1]], i, -gi * val(0, i) / (b * b));
          break;
        }
        case OpCode::kNeg:
          accumulate(adj[ids[0]], i, -gi);
          break;
        case OpCode::kExp:
          accumulate(adj[ids[0]], i, gi * out(i));
          break;
        case OpCode::kLog:
          accumulate(adj[ids[0]], i, gi / val(0, i));
          break;
        case OpCode::kLog1p:
          accumulate(adj[ids[0]], i, gi / (1.0 + val(0, i)));
          break;
        case OpCode::kSigmoid: {
          const double y = out(i);
          accumulate(adj[ids[0]], i, gi * y * (1.0 - y));
          break;
        }
        case OpCode::kLogSigmoid:
          accumulate(adj[ids[0]], i, gi * sigmoid(-val(0, i)));
          break;
        case OpCode::kRelu:
          accumulate(adj[ids[0]], i, val(0, i) > 0.0 ? gi : 0.0);
          break;
        case OpCode::kAbs: {
          const double x = val(0, i);
          accumulate(adj[ids[0]], i, x > 0.0 ? gi : (x < 0.0 ? -gi : 0.0));
          break;
        }
        case OpCode::kPow: {
          const double p = val(1, i);
          accumulate(adj[ids[0]], i,
                     p == 0.0 ? 0.0 : gi * p * std::pow(val(0, i), p - 1.0));
          break;
        }
        case OpCode::kClampMin:
          if (val(0, i) > val(1, i)) {
            accumulate(adj[ids[0]], i, gi);
          } else {
            accumulate(adj[ids[1]], i, gi);
          }
          break;
        case OpCode::kMin:
          accumulate(adj[val(0, i) <= val(1, i) ? ids[0] : ids[1]], i, gi);
          break;
        case OpCode::kMax:
          accumulate(adj[val(0, i) >= val(1, i) ? ids[0] : ids[1]], i, gi);
          break;
        case OpCode::kIndicatorLt:
        case OpCode::kIndicatorGt:
          break;
        case OpCode::kWhere:
          accumulate(adj[val(0, i) != 0.0 ? ids[1] : ids[2]], i, gi);
          break;
        default:
          throw std::logic_error("gradient: unhandled op");
      }
    }
  }

  std::map<std::string, BatchVector> result;
  for (const auto& name : wrt) {
    auto id = find_input(name);
    if (!id) throw std::invalid_argument("gradient: no input named " + name);
    if (*id > output) {
      result.emplace(name, BatchVector::filled(value_length(nodes_[*id].value), 0.0));
    } else {
      result.emplace(name, BatchVector(adj[*id]));
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Expr

Expr apply(OpCode op, std::initializer_list<Expr> operands) {
  if (operands.size() == 0) throw std::invalid_argument("apply: no operands");
  CompGraph& g = operands.begin()->graph();
  std::vector<CompGraph::NodeId> ids;
  for (const Expr& e : operands) {
    if (&e.graph() != &g) throw std::invalid_argument("apply: mixed graphs");
    ids.push_back(e.id());
  }
  return {g, g.apply(op, ids)};
}

Expr operator+(Expr a, Expr b) { return apply(OpCode::kAdd, {a, b}); }
Expr operator-(Expr a, Expr b) { return apply(OpCode::kSub, {a, b}); }
Expr operator*(Expr a, Expr b) { return apply(OpCode::kMul, {a, b}); }
Expr operator/(Expr a, Expr b) { return apply(OpCode::kDiv, {a, b}); }
Expr operator-(Expr a) { return apply(OpCode::kNeg, {a}); }
Expr operator+(Expr a, double b) { return a + a.constant(b); }
Expr operator+(double a, Expr b) { return b.constant(a) + b; }
Expr operator-(Expr a, double b) { return a - a.constant(b); }
Expr operator-(double a, Expr b) { return b.constant(a) - b; }
Expr operator*(Expr a, double b) { return a * a.constant(b); }
Expr operator*(double a, Expr b) { return b.constant(a) * b; }
Expr operator/(Expr a, double b) { return a / a.constant(b); }
Expr operator/(double a, Expr b) { return b.constant(a) / b; }

Expr exp(Expr a) { return apply(OpCode::kExp, {a}); }
Expr log(Expr a) { return apply(OpCode::kLog, {a}); }
Expr log1p(Expr a) { return apply(OpCode::kLog1p, {a}); }
Expr sigmoid(Expr a) { return apply(OpCode::kSigmoid, {a}); }
Expr logsigmoid(Expr a) { return apply(OpCode::kLogSigmoid, {a}); }
Expr relu(Expr a) { return apply(OpCode::kRelu, {a}); }
Expr abs(Expr a) { return apply(OpCode::kAbs, {a}); }
Expr pow(Expr a, double p) { return apply(OpCode::kPow, {a, a.constant(p)}); }
Expr clamp_min(Expr a, double lo) {
  return apply(OpCode::kClampMin, {a, a.constant(lo)});
}
Expr indicator_lt(Expr a, Expr b) { return apply(OpCode::kIndicatorLt, {a, b}); }
Expr indicator_gt(Expr a, Expr b) { return apply(OpCode::kIndicatorGt, {a, b}); }
Expr where(Expr cond, Expr a, Expr b) { return apply(OpCode::kWhere, {cond, a, b}); }
Expr concat(Expr a, Expr b) { return apply(OpCode::kConcat, {a, b}); }
Expr mean(Expr a) { return apply(OpCode::kMean, {a}); }
Expr var(Expr a) { return apply(OpCode::kVar, {a}); }
Expr stddev(Expr a) { return apply(OpCode::kStd, {a}); }

// ---------------------------------------------------------------------------

BatchVector finite_diff_gradient(
    const std::function<Value(const BatchVector&)>& f, const BatchVector& x,
    double h) {
  auto total = [&](const BatchVector& at, std::size_t coord) {
    const Value v = f(at);
    double s = 0.0;
    for (std::size_t i = 0; i < value_length(v); ++i) s += element(v, i);
    if (!std::isfinite(s)) {
      throw std::domain_error("finite_diff_gradient: non-finite evaluation at coordinate " +
                              std::to_string(coord));
    }
    return s;
  };
  std::vector<double> grad(x.size());
  std::vector<double> work = x.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = work[i];
    work[i] = orig + h;
    const double up = total(BatchVector(work), i);
    work[i] = orig - h;
    const double down = total(BatchVector(work), i);
    work[i] = orig;
    grad[i] = (up - down) / (2.0 * h);
  }
  return BatchVector(std::move(grad));
}

}  // namespace disco
