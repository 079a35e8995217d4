#pragma once

// A small expression language for candidate objectives.
//
//   program  := { binding NEWLINE } expr
//   binding  := "let" IDENT "=" expr
//   expr     := term { ("+"|"-") term }
//   term     := factor { ("*"|"/") factor }
//   factor   := ["-"] atom
//   atom     := NUMBER | IDENT | call | "(" expr ")"
//   call     := FUNC "(" expr { "," expr } ")"
//
// Leaf identifiers are pcl, prl, rcl, rrl (per-example log-probs) and beta.
// '#' starts a comment; newlines inside parentheses are ignored. Programs
// cannot loop, recurse or perform I/O, so evaluation always terminates.

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "disco/batch_math.hpp"
#include "disco/losses.hpp"

namespace disco::dsl {

struct SourcePos {
  std::size_t line = 1;  // 1-based
  std::size_t column = 1;
};

enum class DiagnosticKind { kLex, kSyntax, kUnboundName, kArity, kType };

std::string_view diagnostic_kind_name(DiagnosticKind kind);

struct ParseDiagnostic {
  SourcePos pos;
  std::string message;
  DiagnosticKind kind;

  // "line L, column C: <kind> error: <message>"
  std::string to_string() const;
};

struct AstNode;
using AstPtr = std::shared_ptr<const AstNode>;

struct AstNode {
  enum class Kind { kNumber, kIdent, kNeg, kBinary, kCall };

  Kind kind;
  SourcePos pos;
  double number = 0.0;  // kNumber
  std::string name;     // kIdent: identifier; kCall: function name
  char op = 0;          // kBinary: one of + - * /
  std::vector<AstPtr> args;
};

// Structural equality; source positions are ignored.
bool same_structure(const AstNode& a, const AstNode& b);

struct Binding {
  std::string name;
  AstPtr expr;
  SourcePos pos;
};

struct ObjectiveProgram {
  std::vector<Binding> bindings;
  AstPtr result;
  std::string source_text;
};

bool same_structure(const ObjectiveProgram& a, const ObjectiveProgram& b);

using ParseResult = std::variant<ObjectiveProgram, ParseDiagnostic>;

// Total and deterministic: malformed input yields the first diagnostic.
ParseResult parse_program(std::string_view source);

// Arity, literal-exponent, reduction-operand and result-shape checks. The
// result must have N or 2N entries.
std::optional<ParseDiagnostic> check_program(const ObjectiveProgram& program);

// Canonical source text; parse(render(p)) renders back to the same text.
std::string render(const ObjectiveProgram& program);

// Parses and checks, throwing std::invalid_argument with the diagnostic text.
ObjectiveProgram compile(std::string_view source);

// Adds the program's nodes on top of existing batch leaves.
Expr build_program(const ObjectiveProgram& program, const LossInputs& inputs);

// Per-example values, length N or 2N. Throws FiniteViolation.
BatchVector eval_program(const ObjectiveProgram& program,
                         const PreferenceBatch& batch, double beta);

struct ProgramGradient {
  BatchVector losses;
  double mean_loss;
  BatchVector d_policy_chosen;    // d mean(losses) / d pcl
  BatchVector d_policy_rejected;  // d mean(losses) / d prl
};

ProgramGradient grad_program(const ObjectiveProgram& program,
                             const PreferenceBatch& batch, double beta);

// Canonical DSL transcription of a catalog loss.
std::string builtin_source(LossId id, Variant variant = Variant::kBetaCorrected);

}  // namespace disco::dsl
