#pragma once

// Batched scalar arithmetic over 64-bit reals with a small reverse-mode tape.
//
// Every quantity is either a scalar or a BatchVector; scalars broadcast
// against vectors in elementwise operations. Reductions fold left to right so
// results are bit-reproducible.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "disco/errors.hpp"

namespace disco {

class BatchVector {
 public:
  BatchVector() = default;
  explicit BatchVector(std::vector<double> values) : values_(std::move(values)) {}
  BatchVector(std::initializer_list<double> values) : values_(values) {}

  static BatchVector filled(std::size_t n, double value) {
    return BatchVector(std::vector<double>(n, value));
  }

  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const { return values_; }
  const std::vector<double>& data() const { return values_; }

  // Index of the first NaN or infinity, if any.
  std::optional<std::size_t> first_non_finite() const;

  friend bool operator==(const BatchVector&, const BatchVector&) = default;

 private:
  std::vector<double> values_;
};

// A node value: scalar or per-example vector.
using Value = std::variant<double, BatchVector>;

bool is_scalar(const Value& v);
std::size_t value_length(const Value& v);  // 1 for scalars
double element(const Value& v, std::size_t i);  // scalars broadcast

enum class OpCode {
  kAdd,
  kSub,
  kMul,
  kDiv,
  kNeg,
  kExp,
  kLog,
  kLog1p,
  kSigmoid,
  kLogSigmoid,
  kRelu,
  kAbs,
  kPow,          // pow(x, p): p is treated as a constant exponent
  kClampMin,     // clamp_min(x, lo)
  kMin,
  kMax,
  kIndicatorLt,  // 1 where a < b
  kIndicatorGt,  // 1 where a > b
  kWhere,        // where(cond, a, b): a where cond != 0
  kConcat,
  kMean,
  kVar,
  kStd,
};

std::size_t arity(OpCode op);
std::string_view op_name(OpCode op);
bool is_reduction(OpCode op);

Value apply_op(OpCode op, std::span<const Value> operands);
Value apply_op(OpCode op, const Value& a);
Value apply_op(OpCode op, const Value& a, const Value& b);
Value apply_op(OpCode op, const Value& a, const Value& b, const Value& c);

double sigmoid(double x);
double log_sigmoid(double x);

enum class StatKind { kMean, kVariance, kStd };

struct ScalarStat {
  double value;
  StatKind kind;
};

// var and std use the unbiased divisor N-1; a length-1 vector has var = std = 0.
ScalarStat reduce(StatKind stat, const BatchVector& a);

// Append-only tape. Nodes are evaluated as they are added, so operands always
// precede the nodes that use them.
class CompGraph {
 public:
  using NodeId = std::size_t;

  NodeId input(std::string name, Value value);
  NodeId constant(double value);
  NodeId apply(OpCode op, std::initializer_list<NodeId> operands);
  NodeId apply(OpCode op, std::span<const NodeId> operands);

  const Value& value(NodeId id) const { return nodes_.at(id).value; }
  std::size_t size() const { return nodes_.size(); }
  std::optional<NodeId> find_input(std::string_view name) const;

  // d(sum of output elements)/d(leaf) for every requested leaf name. Scalar
  // leaves yield length-1 vectors. Kinks use relu'(0) = abs'(0) = 0 and
  // indicators have zero derivative.
  std::map<std::string, BatchVector> gradient(
      NodeId output, std::span<const std::string> wrt) const;

 private:
  struct Node {
    std::optional<OpCode> op;  // empty for leaves and constants
    std::vector<NodeId> operands;
    Value value;
    std::string name;  // set for named inputs
  };
  std::vector<Node> nodes_;
};

// Thin handle for writing formulas against a CompGraph with operators.
class Expr {
 public:
  Expr(CompGraph& graph, CompGraph::NodeId id) : graph_(&graph), id_(id) {}

  CompGraph& graph() const { return *graph_; }
  CompGraph::NodeId id() const { return id_; }
  const Value& value() const { return graph_->value(id_); }

  Expr constant(double v) const { return {*graph_, graph_->constant(v)}; }

 private:
  CompGraph* graph_;
  CompGraph::NodeId id_;
};

Expr apply(OpCode op, std::initializer_list<Expr> operands);

Expr operator+(Expr a, Expr b);
Expr operator-(Expr a, Expr b);
Expr operator*(Expr a, Expr b);
Expr operator/(Expr a, Expr b);
Expr operator-(Expr a);
Expr operator+(Expr a, double b);
Expr operator+(double a, Expr b);
Expr operator-(Expr a, double b);
Expr operator-(double a, Expr b);
Expr operator*(Expr a, double b);
Expr operator*(double a, Expr b);
Expr operator/(Expr a, double b);
Expr operator/(double a, Expr b);

Expr exp(Expr a);
Expr log(Expr a);
Expr log1p(Expr a);
Expr sigmoid(Expr a);
Expr logsigmoid(Expr a);
Expr relu(Expr a);
Expr abs(Expr a);
Expr pow(Expr a, double p);
Expr clamp_min(Expr a, double lo);
Expr indicator_lt(Expr a, Expr b);
Expr indicator_gt(Expr a, Expr b);
Expr where(Expr cond, Expr a, Expr b);
Expr concat(Expr a, Expr b);
Expr mean(Expr a);
Expr var(Expr a);
Expr stddev(Expr a);

// Central difference of sum(f(x)) with respect to each coordinate of x.
// Throws std::domain_error naming the coordinate if f is not finite there.
BatchVector finite_diff_gradient(
    const std::function<Value(const BatchVector&)>& f, const BatchVector& x,
    double h);

}  // namespace disco
