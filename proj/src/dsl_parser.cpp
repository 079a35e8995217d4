#include <bit>
#include <cstdint>
#include <set>

#include "disco/text_format.hpp"
#include "dsl_lexer.hpp"

namespace disco::dsl {

namespace {

constexpr std::size_t kMaxSourceBytes = 64 * 1024;
constexpr int kMaxDepth = 200;

struct FunctionEntry {
  std::string_view name;
  OpCode op;
};

constexpr FunctionEntry kFunctions[] = {
    {"exp", OpCode::kExp},
    {"log", OpCode::kLog},
    {"log1p", OpCode::kLog1p},
    {"sigmoid", OpCode::kSigmoid},
    {"logsigmoid", OpCode::kLogSigmoid},
    {"relu", OpCode::kRelu},
    {"abs", OpCode::kAbs},
    {"pow", OpCode::kPow},
    {"clamp_min", OpCode::kClampMin},
    {"mean", OpCode::kMean},
    {"var", OpCode::kVar},
    {"std", OpCode::kStd},
    {"min", OpCode::kMin},
    {"max", OpCode::kMax},
    {"where", OpCode::kWhere},
    {"indicator_lt", OpCode::kIndicatorLt},
    {"indicator_gt", OpCode::kIndicatorGt},
    {"concat", OpCode::kConcat},
};

struct SyntaxError {
  ParseDiagnostic diag;
};

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

  ObjectiveProgram program() {
    ObjectiveProgram p;
    skip_newlines();
    while (peek().kind == TokenKind::kLet) {
      p.bindings.push_back(binding());
      bound_.insert(p.bindings.back().name);
      if (peek().kind == TokenKind::kEnd) {
        fail(peek(), "missing result expression after the last binding",
             DiagnosticKind::kSyntax);
      }
      expect(TokenKind::kNewline, "after binding");
      skip_newlines();
    }
    if (peek().kind == TokenKind::kEnd) {
      fail(peek(), "empty program: expected a result expression",
           DiagnosticKind::kSyntax);
    }
    p.result = expr(0);
    skip_newlines();
    if (peek().kind != TokenKind::kEnd) {
      fail(peek(), "unexpected " + describe(peek()) + " after the result expression",
           DiagnosticKind::kSyntax);
    }
    return p;
  }

 private:
  const Token& peek() const { return tokens_[pos_]; }
  const Token& next() { return tokens_[pos_ < tokens_.size() - 1 ? pos_++ : pos_]; }

  [[noreturn]] void fail(const Token& at, std::string message, DiagnosticKind kind) {
    throw SyntaxError{ParseDiagnostic{at.pos, std::move(message), kind}};
  }

  static std::string describe(const Token& t) {
    if (t.kind == TokenKind::kIdent || t.kind == TokenKind::kNumber) {
      return std::string(token_description(t.kind)) + " '" + t.text + "'";
    }
    return std::string(token_description(t.kind));
  }

  const Token& expect(TokenKind kind, std::string_view context) {
    if (peek().kind != kind) {
      fail(peek(),
           "expected " + std::string(token_description(kind)) + " " +
               std::string(context) + ", found " + describe(peek()),
           DiagnosticKind::kSyntax);
    }
    return next();
  }

  void skip_newlines() {
    while (peek().kind == TokenKind::kNewline) next();
  }

  Binding binding() {
    const Token& let = next();
    const Token& name = expect(TokenKind::kIdent, "after 'let'");
    if (is_leaf_name(name.text) || function_op(name.text)) {
      fail(name, "'" + name.text + "' is reserved and cannot be rebound",
           DiagnosticKind::kSyntax);
    }
    if (bound_.count(name.text)) {
      fail(name, "'" + name.text + "' is already bound", DiagnosticKind::kSyntax);
    }
    expect(TokenKind::kEquals, "after the bound name");
    Binding b{name.text, expr(0), let.pos};
    return b;
  }

  AstPtr expr(int depth) {
    guard(depth);
    AstPtr lhs = term(depth + 1);
    while (peek().kind == TokenKind::kPlus || peek().kind == TokenKind::kMinus) {
      const Token& op = next();
      AstPtr rhs = term(depth + 1);
      lhs = binary(op, std::move(lhs), std::move(rhs));
    }
    return lhs;
  }

  AstPtr term(int depth) {
    guard(depth);
    AstPtr lhs = factor(depth + 1);
    while (peek().kind == TokenKind::kStar || peek().kind == TokenKind::kSlash) {
      const Token& op = next();
      AstPtr rhs = factor(depth + 1);
      lhs = binary(op, std::move(lhs), std::move(rhs));
    }
    return lhs;
  }

  AstPtr factor(int depth) {
    guard(depth);
    if (peek().kind == TokenKind::kMinus) {
      const Token& minus = next();
      if (peek().kind == TokenKind::kMinus) {
        fail(peek(), "repeated unary '-'; use parentheses", DiagnosticKind::kSyntax);
      }
      auto node = std::make_shared<AstNode>();
      node->kind = AstNode::Kind::kNeg;
      node->pos = minus.pos;
      node->args.push_back(atom(depth + 1));
      return node;
    }
    return atom(depth + 1);
  }

  AstPtr atom(int depth) {
    guard(depth);
    const Token& t = peek();
    auto node = std::make_shared<AstNode>();
    node->pos = t.pos;
    switch (t.kind) {
      case TokenKind::kNumber:
        next();
        node->kind = AstNode::Kind::kNumber;
        node->number = t.number;
        return node;
      case TokenKind::kIdent: {
        next();
        if (peek().kind == TokenKind::kLParen) return call(t, depth);
        if (function_op(t.text)) {
          fail(t, "function '" + t.text + "' must be called with arguments",
               DiagnosticKind::kSyntax);
        }
        if (!is_leaf_name(t.text) && !bound_.count(t.text)) {
          fail(t, "unbound name '" + t.text + "'", DiagnosticKind::kUnboundName);
        }
        node->kind = AstNode::Kind::kIdent;
        node->name = t.text;
        return node;
      }
      case TokenKind::kLParen: {
        next();
        AstPtr inner = expr(depth + 1);
        expect(TokenKind::kRParen, "to close '('");
        return inner;
      }
      default:
        fail(t, "expected an expression, found " + describe(t), DiagnosticKind::kSyntax);
    }
  }

  AstPtr call(const Token& name, int depth) {
    if (!function_op(name.text)) {
      fail(name, "unknown function '" + name.text + "'", DiagnosticKind::kUnboundName);
    }
    next();  // '('
    auto node = std::make_shared<AstNode>();
    node->kind = AstNode::Kind::kCall;
    node->pos = name.pos;
    node->name = name.text;
    if (peek().kind == TokenKind::kRParen) {
      fail(peek(), "'" + name.text + "' called without arguments", DiagnosticKind::kArity);
    }
    node->args.push_back(expr(depth + 1));
    while (peek().kind == TokenKind::kComma) {
      next();
      node->args.push_back(expr(depth + 1));
    }
    expect(TokenKind::kRParen, "to close the call to '" + name.text + "'");
    return node;
  }

  static AstPtr binary(const Token& op, AstPtr lhs, AstPtr rhs) {
    auto node = std::make_shared<AstNode>();
    node->kind = AstNode::Kind::kBinary;
    node->pos = op.pos;
    node->op = op.text[0];
    node->args = {std::move(lhs), std::move(rhs)};
    return node;
  }

  void guard(int depth) {
    if (depth > kMaxDepth) {
      fail(peek(), "expression nested too deeply", DiagnosticKind::kSyntax);
    }
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  std::set<std::string> bound_;
};

int precedence(const AstNode& n) {
  switch (n.kind) {
    case AstNode::Kind::kBinary: return (n.op == '+' || n.op == '-') ? 1 : 2;
    case AstNode::Kind::kNeg: return 3;
    default: return 4;
  }
}

void render_expr(const AstNode& n, std::string& out);

void render_operand(const AstNode& n, bool parens, std::string& out) {
  if (parens) out += '(';
  render_expr(n, out);
  if (parens) out += ')';
}

void render_expr(const AstNode& n, std::string& out) {
  switch (n.kind) {
    case AstNode::Kind::kNumber:
      out += format_double(n.number);
      return;
    case AstNode::Kind::kIdent:
      out += n.name;
      return;
    case AstNode::Kind::kNeg:
      out += '-';
      render_operand(*n.args[0], precedence(*n.args[0]) < 4, out);
      return;
    case AstNode::Kind::kBinary: {
      const int p = precedence(n);
      render_operand(*n.args[0], precedence(*n.args[0]) < p, out);
      out += ' ';
      out += n.op;
      out += ' ';
      render_operand(*n.args[1], precedence(*n.args[1]) <= p, out);
      return;
    }
    case AstNode::Kind::kCall:
      out += n.name;
      out += '(';
      for (std::size_t i = 0; i < n.args.size(); ++i) {
        if (i) out += ", ";
        render_expr(*n.args[i], out);
      }
      out += ')';
      return;
  }
}

}  // namespace

std::optional<OpCode> function_op(std::string_view name) {
  for (const auto& f : kFunctions) {
    if (f.name == name) return f.op;
  }
  return std::nullopt;
}

bool is_leaf_name(std::string_view name) {
  return name == "pcl" || name == "prl" || name == "rcl" || name == "rrl" ||
         name == "beta";
}

std::string_view diagnostic_kind_name(DiagnosticKind kind) {
  switch (kind) {
    case DiagnosticKind::kLex: return "lex";
    case DiagnosticKind::kSyntax: return "syntax";
    case DiagnosticKind::kUnboundName: return "unbound-name";
    case DiagnosticKind::kArity: return "arity";
    case DiagnosticKind::kType: return "type";
  }
  return "unknown";
}

std::string ParseDiagnostic::to_string() const {
  return "line " + std::to_string(pos.line) + ", column " + std::to_string(pos.column) +
         ": " + std::string(diagnostic_kind_name(kind)) + " error: " + message;
}

bool same_structure(const AstNode& a, const AstNode& b) {
  if (a.kind != b.kind || a.op != b.op || a.name != b.name ||
      a.args.size() != b.args.size()) {
    return false;
  }
  if (a.kind == AstNode::Kind::kNumber &&
      std::bit_cast<std::uint64_t>(a.number) != std::bit_cast<std::uint64_t>(b.number)) {
    return false;
  }
  for (std::size_t i = 0; i < a.args.size(); ++i) {
    if (!same_structure(*a.args[i], *b.args[i])) return false;
  }
  return true;
}

bool same_structure(const ObjectiveProgram& a, const ObjectiveProgram& b) {
  if (a.bindings.size() != b.bindings.size()) return false;
  for (std::size_t i = 0; i < a.bindings.size(); ++i) {
    if (a.bindings[i].name != b.bindings[i].name ||
        !same_structure(*a.bindings[i].expr, *b.bindings[i].expr)) {
      return false;
    }
  }
  return same_structure(*a.result, *b.result);
}

ParseResult parse_program(std::string_view source) {
  if (source.size() > kMaxSourceBytes) {
    return ParseDiagnostic{{1, 1}, "program exceeds 65536 bytes", DiagnosticKind::kLex};
  }
  LexResult lexed = lex(source);
  if (lexed.error) return *lexed.error;
  try {
    Parser parser(std::move(lexed.tokens));
    ObjectiveProgram program = parser.program();
    program.source_text = std::string(source);
    return program;
  } catch (const SyntaxError& e) {
    return e.diag;
  }
}

std::string render(const ObjectiveProgram& program) {
  std::string out;
  for (const auto& b : program.bindings) {
    out += "let ";
    out += b.name;
    out += " = ";
    render_expr(*b.expr, out);
    out += '\n';
  }
  render_expr(*program.result, out);
  return out;
}

}  // namespace disco::dsl
