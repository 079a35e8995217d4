#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "disco/dsl.hpp"

namespace disco::dsl {

enum class TokenKind {
  kNumber,
  kIdent,
  kLet,
  kPlus,
  kMinus,
  kStar,
  kSlash,
  kLParen,
  kRParen,
  kComma,
  kEquals,
  kNewline,
  kEnd,
};

struct Token {
  TokenKind kind;
  std::string text;
  double number = 0.0;
  SourcePos pos;
};

std::string_view token_description(TokenKind kind);

struct LexResult {
  std::vector<Token> tokens;  // always terminated by kEnd when ok
  std::optional<ParseDiagnostic> error;
};

LexResult lex(std::string_view source);

// Operation behind a DSL function name (exp, mean, where, ...).
std::optional<OpCode> function_op(std::string_view name);

bool is_leaf_name(std::string_view name);

}  // namespace disco::dsl
