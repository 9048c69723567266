#include "sql_lexer.hpp"

#include <cctype>

#include "refinery/errors.hpp"

namespace refinery::detail {

namespace {

bool word_start(unsigned char c) { return std::isalpha(c) || c == '_' || c >= 0x80; }
bool word_char(unsigned char c) { return std::isalnum(c) || c == '_' || c == '$' || c >= 0x80; }

std::string at_offset(std::size_t pos) { return " at offset " + std::to_string(pos); }

}  // namespace

std::string upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::vector<Token> tokenize(std::string_view sql) {
  std::vector<Token> out;
  std::size_t i = 0;
  const std::size_t n = sql.size();
  int depth = 0;

  auto quoted = [&](char close, TokenKind kind, bool doubled_escape) {
    std::size_t start = i++;
    std::string text;
    while (true) {
      if (i >= n) throw SyntaxError("unterminated quoted text" + at_offset(start));
      char c = sql[i++];
      if (c == close) {
        if (doubled_escape && i < n && sql[i] == close) {
          text += close;
          ++i;
          continue;
        }
        break;
      }
      text += c;
    }
    out.push_back({kind, start, i, std::move(text), depth});
  };

  while (i < n) {
    unsigned char c = static_cast<unsigned char>(sql[i]);
    if (std::isspace(c)) {
      ++i;
    } else if (c == '-' && i + 1 < n && sql[i + 1] == '-') {
      while (i < n && sql[i] != '\n') ++i;
    } else if (c == '/' && i + 1 < n && sql[i + 1] == '*') {
      std::size_t close = sql.find("*/", i + 2);
      if (close == std::string_view::npos) throw SyntaxError("unterminated comment" + at_offset(i));
      i = close + 2;
    } else if (c == '\'') {
      quoted('\'', TokenKind::string, true);
    } else if (c == '"') {
      quoted('"', TokenKind::quoted_identifier, true);
    } else if (c == '`') {
      quoted('`', TokenKind::quoted_identifier, true);
    } else if (c == '[') {
      quoted(']', TokenKind::quoted_identifier, false);
    } else if (std::isdigit(c) || (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(sql[i + 1])))) {
      std::size_t start = i;
      while (i < n && std::isdigit(static_cast<unsigned char>(sql[i]))) ++i;
      if (i < n && sql[i] == '.') {
        ++i;
        while (i < n && std::isdigit(static_cast<unsigned char>(sql[i]))) ++i;
      }
      if (i < n && (sql[i] == 'e' || sql[i] == 'E')) {
        std::size_t save = i++;
        if (i < n && (sql[i] == '+' || sql[i] == '-')) ++i;
        if (i < n && std::isdigit(static_cast<unsigned char>(sql[i]))) {
          while (i < n && std::isdigit(static_cast<unsigned char>(sql[i]))) ++i;
        } else {
          i = save;
        }
      }
      if (i < n && word_char(static_cast<unsigned char>(sql[i]))) {
        throw SyntaxError("malformed number" + at_offset(start));
      }
      out.push_back({TokenKind::number, start, i, std::string(sql.substr(start, i - start)), depth});
    } else if (word_start(c)) {
      std::size_t start = i;
      while (i < n && word_char(static_cast<unsigned char>(sql[i]))) ++i;
      out.push_back({TokenKind::word, start, i, std::string(sql.substr(start, i - start)), depth});
    } else {
      static constexpr std::string_view two[] = {"<=", ">=", "<>", "!=", "==", "||", "<<", ">>"};
      std::size_t len = 1;
      for (auto t : two) {
        if (sql.substr(i, 2) == t) len = 2;
      }
      if (len == 1 && std::string_view("(),.;+-*/%<>=~&|?:!").find(static_cast<char>(c)) == std::string_view::npos) {
        throw SyntaxError(std::string("unexpected character '") + static_cast<char>(c) + "'" + at_offset(i));
      }
      std::string text(sql.substr(i, len));
      if (text == ")") {
        if (--depth < 0) throw SyntaxError("unbalanced ')'" + at_offset(i));
      }
      out.push_back({TokenKind::symbol, i, i + len, text, depth});
      if (text == "(") ++depth;
      i += len;
    }
  }
  if (depth != 0) throw SyntaxError("unbalanced '('");
  return out;
}

std::vector<std::size_t> match_parentheses(const std::vector<Token>& tokens) {
  std::vector<std::size_t> match(tokens.size(), static_cast<std::size_t>(-1));
  std::vector<std::size_t> open;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].kind != TokenKind::symbol) continue;
    if (tokens[i].text == "(") {
      open.push_back(i);
    } else if (tokens[i].text == ")") {
      match[i] = open.back();
      match[open.back()] = i;
      open.pop_back();
    }
  }
  return match;
}

}  // namespace refinery::detail
