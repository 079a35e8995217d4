#include "dsl_lexer.hpp"

#include <cctype>

#include "disco/text_format.hpp"

namespace disco::dsl {

std::string_view token_description(TokenKind kind) {
  switch (kind) {
    case TokenKind::kNumber: return "number";
    case TokenKind::kIdent: return "identifier";
    case TokenKind::kLet: return "'let'";
    case TokenKind::kPlus: return "'+'";
    case TokenKind::kMinus: return "'-'";
    case TokenKind::kStar: return "'*'";
    case TokenKind::kSlash: return "'/'";
    case TokenKind::kLParen: return "'('";
    case TokenKind::kRParen: return "')'";
    case TokenKind::kComma: return "','";
    case TokenKind::kEquals: return "'='";
    case TokenKind::kNewline: return "end of line";
    case TokenKind::kEnd: return "end of input";
  }
  return "token";
}

namespace {

bool ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}

bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

bool digit(char c) { return c >= '0' && c <= '9'; }

}  // namespace

LexResult lex(std::string_view src) {
  LexResult out;
  std::size_t i = 0;
  SourcePos pos;
  int depth = 0;

  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n && i < src.size(); ++k, ++i) {
      if (src[i] == '\n') {
        ++pos.line;
        pos.column = 1;
      } else {
        ++pos.column;
      }
    }
  };
  auto fail = [&](SourcePos at, std::string message) {
    out.error = ParseDiagnostic{at, std::move(message), DiagnosticKind::kLex};
    return out;
  };
  auto push = [&](TokenKind kind, std::size_t len) {
    out.tokens.push_back({kind, std::string(src.substr(i, len)), 0.0, pos});
    advance(len);
  };

  while (i < src.size()) {
    const char c = src[i];
    if (c == ' ' || c == '\t' || c == '\r') {
      advance(1);
    } else if (c == '#') {
      while (i < src.size() && src[i] != '\n') advance(1);
    } else if (c == '\n') {
      if (depth == 0 && !out.tokens.empty() &&
          out.tokens.back().kind != TokenKind::kNewline) {
        push(TokenKind::kNewline, 1);
      } else {
        advance(1);
      }
    } else if (digit(c) || (c == '.' && i + 1 < src.size() && digit(src[i + 1]))) {
      std::size_t j = i;
      while (j < src.size() && digit(src[j])) ++j;
      if (j < src.size() && src[j] == '.') {
        ++j;
        while (j < src.size() && digit(src[j])) ++j;
      }
      if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < src.size() && (src[k] == '+' || src[k] == '-')) ++k;
        if (k >= src.size() || !digit(src[k])) {
          SourcePos at = pos;
          at.column += j - i;
          return fail(at, "malformed exponent in number literal");
        }
        while (k < src.size() && digit(src[k])) ++k;
        j = k;
      }
      if (j < src.size() && ident_char(src[j])) {
        return fail(pos, "malformed number literal '" +
                             std::string(src.substr(i, j - i + 1)) + "'");
      }
      const std::string text(src.substr(i, j - i));
      auto value = parse_double(text);
      if (!value) return fail(pos, "malformed number literal '" + text + "'");
      out.tokens.push_back({TokenKind::kNumber, text, *value, pos});
      advance(j - i);
    } else if (ident_start(c)) {
      std::size_t j = i;
      while (j < src.size() && ident_char(src[j])) ++j;
      const std::string_view word = src.substr(i, j - i);
      push(word == "let" ? TokenKind::kLet : TokenKind::kIdent, j - i);
    } else {
      TokenKind kind;
      switch (c) {
        case '+': kind = TokenKind::kPlus; break;
        case '-': kind = TokenKind::kMinus; break;
        case '*': kind = TokenKind::kStar; break;
        case '/': kind = TokenKind::kSlash; break;
        case '(': kind = TokenKind::kLParen; ++depth; break;
        case ')': kind = TokenKind::kRParen; depth = depth > 0 ? depth - 1 : 0; break;
        case ',': kind = TokenKind::kComma; break;
        case '=': kind = TokenKind::kEquals; break;
        default: {
          std::string shown;
          if (static_cast<unsigned char>(c) < 0x20 || static_cast<unsigned char>(c) >= 0x7f) {
            shown = "byte 0x";
            const char* hex = "0123456789abcdef";
            shown += hex[(static_cast<unsigned char>(c) >> 4) & 0xf];
            shown += hex[static_cast<unsigned char>(c) & 0xf];
          } else {
            shown = std::string("'") + c + "'";
          }
          return fail(pos, "unexpected character " + shown);
        }
      }
      push(kind, 1);
    }
  }
  out.tokens.push_back({TokenKind::kEnd, "", 0.0, pos});
  return out;
}

}  // namespace disco::dsl
