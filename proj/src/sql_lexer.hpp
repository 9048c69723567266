#pragma once

// SQL tokenizer shared by the query parser. Internal header.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace refinery::detail {

enum class TokenKind { word, quoted_identifier, number, string, symbol };

struct Token {
  TokenKind kind;
  std::size_t begin;  // byte offsets into the source
  std::size_t end;
  std::string text;   // unquoted / unescaped for identifiers and strings
  int depth = 0;      // parenthesis depth; a '(' and its ')' share the outer depth
};

std::vector<Token> tokenize(std::string_view sql);

// match[i] is the index of the partner parenthesis for '(' / ')' tokens.
std::vector<std::size_t> match_parentheses(const std::vector<Token>& tokens);

std::string upper(std::string_view s);

}  // namespace refinery::detail
