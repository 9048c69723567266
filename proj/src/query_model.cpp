#include "refinery/query_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <unordered_set>

#include "refinery/errors.hpp"
#include "sql_lexer.hpp"

namespace refinery {

namespace {

using detail::Token;
using detail::TokenKind;

const std::unordered_set<std::string>& keywords() {
  static const std::unordered_set<std::string> words = {
      "ALL",     "AND",     "AS",       "ASC",     "BETWEEN", "BY",     "CASE",
      "CAST",    "CROSS",   "CURRENT_DATE",        "CURRENT_TIME",    "CURRENT_TIMESTAMP",
      "DESC",    "DISTINCT", "ELSE",    "END",     "ESCAPE",  "EXCEPT", "EXISTS",
      "FALSE",   "FILTER",  "FROM",     "FULL",    "GLOB",    "GROUP",  "HAVING",
      "IN",      "INNER",   "INTERSECT", "IS",     "ISNULL",  "JOIN",   "LEFT",
      "LIKE",    "LIMIT",   "MATCH",    "NATURAL", "NOT",     "NOTNULL", "NULL",
      "NULLS",   "OFFSET",  "ON",       "OR",      "ORDER",   "OUTER",  "OVER",
      "PARTITION", "REGEXP", "RIGHT",   "SELECT",  "THEN",    "TRUE",   "UNION",
      "USING",   "VALUES",  "WHEN",     "WHERE",   "WINDOW",  "WITH",   "FIRST",
      "LAST",    "ROWS",    "RANGE",    "PRECEDING", "FOLLOWING", "UNBOUNDED",
      "CURRENT", "ROW",     "COLLATE",
  };
  return words;
}

bool is_keyword(const Token& t) {
  return t.kind == TokenKind::word && keywords().contains(detail::upper(t.text));
}

bool is_identifier(const Token& t) {
  return t.kind == TokenKind::quoted_identifier || (t.kind == TokenKind::word && !is_keyword(t));
}

std::optional<CompareOp> comparison_of(const Token& t) {
  if (t.kind != TokenKind::symbol) return std::nullopt;
  if (t.text == "<") return CompareOp::lt;
  if (t.text == "<=") return CompareOp::le;
  if (t.text == "=" || t.text == "==") return CompareOp::eq;
  if (t.text == ">=") return CompareOp::ge;
  if (t.text == ">") return CompareOp::gt;
  return std::nullopt;
}

CompareOp flipped(CompareOp op) {
  switch (op) {
    case CompareOp::lt: return CompareOp::gt;
    case CompareOp::le: return CompareOp::ge;
    case CompareOp::ge: return CompareOp::le;
    case CompareOp::gt: return CompareOp::lt;
    default: return op;
  }
}

bool ieq(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::toupper(static_cast<unsigned char>(x)) ==
                  std::toupper(static_cast<unsigned char>(y));
         });
}

class Parser {
 public:
  explicit Parser(std::string_view sql) : sql_(sql), tokens_(detail::tokenize(sql)) {}

  ParsedQuery run() {
    ParsedQuery q;
    q.original_sql = std::string(sql_);
    matches_ = detail::match_parentheses(tokens_);
    end_ = statement_end();
    if (end_ == 0 || !word_is(0, "SELECT")) {
      throw SyntaxError("expected a single SELECT statement");
    }
    locate_clauses(q);
    if (where_) extract_conditions(where_->first, where_->second, 0, Clause::where, q);
    if (having_) extract_conditions(having_->first, having_->second, 0, Clause::having, q);
    if (q.predicates.empty()) {
      throw NoRefinablePredicates("query has no predicate of the form <attribute op literal>");
    }
    for (std::size_t i = 0; i < q.predicates.size(); ++i) q.predicates[i].id = i;
    if (from_) collect_tables(from_->first, from_->second, q);
    collect_columns(q);
    return q;
  }

 private:
  using Range = std::pair<std::size_t, std::size_t>;  // token indices [first, second)

  bool word_is(std::size_t i, std::string_view w) const {
    return i < tokens_.size() && tokens_[i].kind == TokenKind::word && ieq(tokens_[i].text, w);
  }
  bool symbol_is(std::size_t i, std::string_view s) const {
    return i < tokens_.size() && tokens_[i].kind == TokenKind::symbol && tokens_[i].text == s;
  }

  SourceSpan span_of(std::size_t first, std::size_t last_exclusive) const {
    return {tokens_[first].begin, tokens_[last_exclusive - 1].end};
  }

  std::size_t statement_end() const {
    std::size_t n = tokens_.size();
    while (n > 0 && symbol_is(n - 1, ";")) --n;
    for (std::size_t i = 0; i < n; ++i) {
      if (symbol_is(i, ";")) throw SyntaxError("multiple statements are not supported");
    }
    return n;
  }

  void locate_clauses(ParsedQuery& q) {
    struct Mark {
      std::string name;
      std::size_t keyword;  // first keyword token
      std::size_t body;     // first body token
    };
    std::vector<Mark> marks;
    std::size_t block_end = end_;
    for (std::size_t i = 1; i < end_; ++i) {
      if (tokens_[i].depth != 0 || tokens_[i].kind != TokenKind::word) continue;
      std::string w = detail::upper(tokens_[i].text);
      if (w == "UNION" || w == "INTERSECT" || w == "EXCEPT") {
        block_end = i;
        break;
      }
      if (w == "FROM" || w == "WHERE" || w == "HAVING" || w == "LIMIT" || w == "WINDOW") {
        marks.push_back({w, i, i + 1});
      } else if ((w == "GROUP" || w == "ORDER") && word_is(i + 1, "BY")) {
        marks.push_back({w, i, i + 2});
        ++i;
      }
    }
    std::map<std::string, Range> found;
    for (std::size_t m = 0; m < marks.size(); ++m) {
      std::size_t stop = m + 1 < marks.size() ? marks[m + 1].keyword : block_end;
      if (marks[m].body >= stop) throw SyntaxError("empty " + marks[m].name + " clause");
      if (!found.emplace(marks[m].name, Range{marks[m].body, stop}).second) {
        throw SyntaxError("duplicate " + marks[m].name + " clause");
      }
    }
    std::size_t select_stop = marks.empty() ? block_end : marks.front().keyword;
    if (select_stop <= 1) throw SyntaxError("empty select list");
    std::size_t select_first = word_is(1, "DISTINCT") || word_is(1, "ALL") ? 2 : 1;
    if (select_first >= select_stop) throw SyntaxError("empty select list");
    q.clauses.select_list = span_of(select_first, select_stop);

    auto take = [&](const char* name, std::optional<Range>& slot, std::optional<SourceSpan>& span) {
      if (auto it = found.find(name); it != found.end()) {
        slot = it->second;
        span = span_of(it->second.first, it->second.second);
      }
    };
    take("FROM", from_, q.clauses.from);
    take("WHERE", where_, q.clauses.where);
    take("GROUP", group_by_, q.clauses.group_by);
    take("HAVING", having_, q.clauses.having);
  }

  // Splits a boolean condition at AND / OR on `depth` and analyses each term.
  void extract_conditions(std::size_t first, std::size_t last, int depth, Clause clause,
                          ParsedQuery& q) {
    std::vector<Range> terms;
    std::size_t start = first;
    bool in_between = false;
    for (std::size_t i = first; i < last; ++i) {
      const Token& t = tokens_[i];
      if (t.depth != depth || t.kind != TokenKind::word) continue;
      std::string w = detail::upper(t.text);
      if (w == "BETWEEN") {
        in_between = true;
      } else if (w == "AND" && in_between) {
        in_between = false;
      } else if (w == "AND" || w == "OR") {
        terms.emplace_back(start, i);
        start = i + 1;
      }
    }
    terms.emplace_back(start, last);

    for (auto [b, e] : terms) {
      while (b < e && word_is(b, "NOT") && tokens_[b].depth == depth) ++b;
      if (b >= e) throw SyntaxError("dangling boolean operator");
      if (symbol_is(b, "(") && matches_[b] == e - 1) {
        if (b + 1 >= e - 1) throw SyntaxError("empty parentheses in condition");
        if (word_is(b + 1, "SELECT")) continue;  // bare scalar subquery
        extract_conditions(b + 1, e - 1, depth + 1, clause, q);
        continue;
      }
      analyse_term(b, e, depth, clause, q);
    }
  }

  std::optional<double> numeric_literal(std::size_t first, std::size_t last) const {
    std::size_t n = last - first;
    double sign = 1.0;
    std::size_t at = first;
    if (n == 2 && (symbol_is(first, "-") || symbol_is(first, "+"))) {
      sign = symbol_is(first, "-") ? -1.0 : 1.0;
      at = first + 1;
    } else if (n != 1) {
      return std::nullopt;
    }
    if (tokens_[at].kind != TokenKind::number) return std::nullopt;
    const std::string& text = tokens_[at].text;
    double value = 0.0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
      throw SyntaxError("malformed number '" + text + "'");
    }
    return sign * value;
  }

  bool is_literal(std::size_t first, std::size_t last) const {
    if (numeric_literal(first, last)) return true;
    return last - first == 1 &&
           (tokens_[first].kind == TokenKind::string || word_is(first, "NULL"));
  }

  AttributeKind attribute_kind(std::size_t first, std::size_t last) const {
    std::size_t n = last - first;
    if (n == 1 && is_identifier(tokens_[first])) return AttributeKind::base;
    if (n == 3 && is_identifier(tokens_[first]) && symbol_is(first + 1, ".") &&
        is_identifier(tokens_[first + 2])) {
      return AttributeKind::base;
    }
    return AttributeKind::derived;
  }

  void add_predicate(ParsedQuery& q, std::size_t attr_first, std::size_t attr_last, Clause clause,
                     CompareOp op, Literal literal, SourceSpan literal_span) {
    RefinablePredicate p;
    p.attribute = std::string(q.text(span_of(attr_first, attr_last)));
    p.attribute_kind = attribute_kind(attr_first, attr_last);
    p.clause = clause;
    p.op = op;
    p.literal = std::move(literal);
    p.literal_span = literal_span;
    if (p.attribute_kind == AttributeKind::base) {
      if (attr_last - attr_first == 1) {
        p.column = ColumnRef{"", tokens_[attr_first].text};
      } else {
        p.column = ColumnRef{tokens_[attr_first].text, tokens_[attr_first + 2].text};
      }
    }
    q.predicates.push_back(std::move(p));
  }

  void analyse_term(std::size_t b, std::size_t e, int depth, Clause clause, ParsedQuery& q) {
    std::size_t k = b;
    for (; k < e; ++k) {
      const Token& t = tokens_[k];
      if (t.depth != depth) continue;
      if (comparison_of(t) || symbol_is(k, "<>") || symbol_is(k, "!=")) break;
      if (t.kind == TokenKind::word) {
        std::string w = detail::upper(t.text);
        if (w == "IN" || w == "BETWEEN" || w == "LIKE" || w == "GLOB" || w == "REGEXP" ||
            w == "MATCH" || w == "IS" || w == "ISNULL" || w == "NOTNULL" ||
            (w == "NOT" && k > b)) {
          break;
        }
      }
    }
    if (k == e) return;  // no comparison: boolean column, EXISTS, function call...
    if (k == b) throw SyntaxError("comparison without left operand");
    const Token& op_tok = tokens_[k];

    if (auto op = comparison_of(op_tok)) {
      if (k + 1 >= e) throw SyntaxError("comparison without right operand");
      if (auto value = numeric_literal(k + 1, e); value && !is_literal(b, k)) {
        add_predicate(q, b, k, clause, *op, *value, span_of(k + 1, e));
      } else if (auto lhs = numeric_literal(b, k); lhs && !is_literal(k + 1, e)) {
        add_predicate(q, k + 1, e, clause, flipped(*op), *lhs, span_of(b, k));
      }
      return;
    }
    if (word_is(k, "IN")) {
      std::size_t open = k + 1;
      if (!symbol_is(open, "(") || matches_[open] != e - 1) return;
      CategoricalSet values;
      for (std::size_t i = open + 1; i < e - 1; ++i) {
        bool value_slot = (i - open - 1) % 2 == 0;
        if (value_slot && tokens_[i].kind == TokenKind::string) {
          values.insert(tokens_[i].text);
        } else if (!value_slot && symbol_is(i, ",")) {
          continue;
        } else {
          return;  // numeric list, subquery or expression: not refinable
        }
      }
      if (e - 1 > open + 1 && symbol_is(e - 2, ",")) throw SyntaxError("trailing comma in IN list");
      add_predicate(q, b, k, clause, CompareOp::in, std::move(values),
                    SourceSpan{tokens_[open].end, tokens_[e - 1].begin});
      return;
    }
    if (word_is(k, "BETWEEN")) {
      std::size_t and_at = k + 1;
      while (and_at < e && !(word_is(and_at, "AND") && tokens_[and_at].depth == depth)) ++and_at;
      if (and_at >= e) throw SyntaxError("BETWEEN without AND");
      auto lo = numeric_literal(k + 1, and_at);
      auto hi = numeric_literal(and_at + 1, e);
      if (!lo || !hi) return;
      add_predicate(q, b, k, clause, CompareOp::ge, *lo, span_of(k + 1, and_at));
      add_predicate(q, b, k, clause, CompareOp::le, *hi, span_of(and_at + 1, e));
      return;
    }
    // NOT IN, NOT BETWEEN, LIKE, IS [NOT] NULL, <>: preserved verbatim.
  }

  void collect_tables(std::size_t first, std::size_t last, ParsedQuery& q) {
    static const std::unordered_set<std::string> stop = {
        "JOIN", "INNER", "LEFT", "RIGHT", "FULL", "OUTER", "CROSS", "NATURAL", "ON", "USING"};
    bool expect_table = true;
    for (std::size_t i = first; i < last; ++i) {
      const Token& t = tokens_[i];
      if (t.depth != 0) continue;
      if (!expect_table) {
        if (symbol_is(i, ",") || word_is(i, "JOIN")) expect_table = true;
        continue;
      }
      TableRef ref;
      std::size_t next = i + 1;
      if (symbol_is(i, "(")) {
        next = matches_[i] + 1;
      } else if (is_identifier(t)) {
        ref.name = t.text;
        table_tokens_.insert(i);
        if (symbol_is(i + 1, ".") && i + 2 < last && is_identifier(tokens_[i + 2])) {
          ref.name = tokens_[i + 2].text;
          table_tokens_.insert(i + 2);
          next = i + 3;
        }
      } else {
        continue;
      }
      std::size_t alias_at = next;
      if (word_is(alias_at, "AS")) ++alias_at;
      if (alias_at < last && is_identifier(tokens_[alias_at]) &&
          !stop.contains(detail::upper(tokens_[alias_at].text))) {
        ref.alias = tokens_[alias_at].text;
        table_tokens_.insert(alias_at);
        next = alias_at + 1;
      }
      if (!ref.name.empty()) q.tables.push_back(ref);
      expect_table = false;
      i = next - 1;
    }
  }

  void collect_columns(ParsedQuery& q) {
    std::unordered_set<std::string> aliases;
    for (std::size_t i = 0; i + 1 < end_; ++i) {
      if (word_is(i, "AS") && is_identifier(tokens_[i + 1])) aliases.insert(detail::upper(tokens_[i + 1].text));
    }
    auto push = [&](ColumnRef ref) {
      for (const auto& c : q.columns) {
        if (ieq(c.table, ref.table) && ieq(c.column, ref.column)) return;
      }
      q.columns.push_back(std::move(ref));
    };
    for (std::size_t i = 0; i < end_; ++i) {
      const Token& t = tokens_[i];
      if (!is_identifier(t) || table_tokens_.contains(i)) continue;
      if (i > 0 && (word_is(i - 1, "AS") || symbol_is(i - 1, "."))) continue;
      if (t.kind == TokenKind::word && symbol_is(i + 1, "(")) continue;  // function name
      if (symbol_is(i + 1, ".")) {
        if (i + 2 < end_ && is_identifier(tokens_[i + 2])) {
          push({q.resolve_table(t.text).value_or(t.text), tokens_[i + 2].text});
        }
        continue;
      }
      if (aliases.contains(detail::upper(t.text))) continue;
      push({"", t.text});
    }
  }

  std::string_view sql_;
  std::vector<Token> tokens_;
  std::vector<std::size_t> matches_;
  std::size_t end_ = 0;
  std::optional<Range> from_, where_, group_by_, having_;
  std::unordered_set<std::size_t> table_tokens_;
};

}  // namespace

std::optional<std::string> ParsedQuery::resolve_table(std::string_view name_or_alias) const {
  for (const auto& t : tables) {
    if (!t.alias.empty() && ieq(t.alias, name_or_alias)) return t.name;
  }
  for (const auto& t : tables) {
    if (ieq(t.name, name_or_alias)) return t.name;
  }
  return std::nullopt;
}

ParsedQuery parse_query(std::string_view sql) { return Parser(sql).run(); }

Assignment baseline_assignment(const ParsedQuery& query) {
  Assignment a;
  a.values.reserve(query.predicates.size());
  for (const auto& p : query.predicates) a.values.push_back(p.literal);
  return a;
}

void check_assignment(const ParsedQuery& query, const Assignment& assignment) {
  if (assignment.values.size() != query.predicates.size()) {
    throw ArityMismatch("assignment has " + std::to_string(assignment.values.size()) +
                        " values, query has " + std::to_string(query.predicates.size()) +
                        " refinable predicates");
  }
  for (std::size_t i = 0; i < assignment.values.size(); ++i) {
    const auto& v = assignment.values[i];
    bool numeric = std::holds_alternative<double>(v);
    if (numeric != (query.predicates[i].value_kind() == ValueKind::numeric)) {
      throw KindMismatch("value " + std::to_string(i) + " does not match the kind of predicate '" +
                         query.predicates[i].attribute + "'");
    }
    if (numeric && !std::isfinite(std::get<double>(v))) {
      throw KindMismatch("value " + std::to_string(i) + " is not a finite number");
    }
  }
}

std::string apply_assignment(const ParsedQuery& query, const Assignment& assignment) {
  check_assignment(query, assignment);
  std::vector<std::pair<SourceSpan, std::string>> edits;
  for (std::size_t i = 0; i < assignment.values.size(); ++i) {
    const auto& v = assignment.values[i];
    std::string text;
    if (const auto* d = std::get_if<double>(&v)) {
      text = format_number(*d);
      // keep "x - -3" and "x--3" from merging tokens or turning into a comment
      const auto begin = query.predicates[i].literal_span.begin;
      if (*d < 0 && begin > 0 && query.original_sql[begin - 1] == '-') text = " " + text;
    } else {
      const auto& set = std::get<CategoricalSet>(v);
      bool first = true;
      for (const auto& s : set) {
        if (!first) text += ", ";
        text += quote_string(s);
        first = false;
      }
    }
    edits.emplace_back(query.predicates[i].literal_span, std::move(text));
  }
  std::sort(edits.begin(), edits.end(),
            [](const auto& a, const auto& b) { return a.first.begin < b.first.begin; });
  std::string out;
  out.reserve(query.original_sql.size() + 32);
  std::size_t at = 0;
  for (const auto& [span, text] : edits) {
    out.append(query.original_sql, at, span.begin - at);
    out += text;
    at = span.end;
  }
  out.append(query.original_sql, at, std::string::npos);
  return out;
}

std::string format_number(double value) {
  if (value == 0.0) return "0";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::string quote_string(std::string_view value) {
  std::string out = "'";
  for (char c : value) {
    if (c == '\'') out += '\'';
    out += c;
  }
  out += '\'';
  return out;
}

std::string format_literal(const Literal& literal) {
  if (const auto* d = std::get_if<double>(&literal)) return format_number(*d);
  std::string out = "(";
  bool first = true;
  for (const auto& s : std::get<CategoricalSet>(literal)) {
    if (!first) out += ", ";
    out += quote_string(s);
    first = false;
  }
  return out + ")";
}

std::string to_string(CompareOp op) {
  switch (op) {
    case CompareOp::lt: return "<";
    case CompareOp::le: return "<=";
    case CompareOp::eq: return "=";
    case CompareOp::ge: return ">=";
    case CompareOp::gt: return ">";
    case CompareOp::in: return "IN";
  }
  return "?";
}

std::string to_string(Clause clause) { return clause == Clause::where ? "where" : "having"; }

std::string canonical_key(const Assignment& assignment) {
  std::string key;
  for (const auto& v : assignment.values) {
    if (!key.empty()) key += " | ";
    key += format_literal(v);
  }
  return key;
}

std::vector<std::string> predicate_labels(const ParsedQuery& query) {
  std::map<std::string, int> seen;
  for (const auto& p : query.predicates) ++seen[p.attribute];
  std::vector<std::string> labels;
  std::map<std::string, int> used;
  for (const auto& p : query.predicates) {
    std::string label = p.attribute;
    if (seen[p.attribute] > 1) label += " " + to_string(p.op);
    if (used[label]++ > 0) label += " #" + std::to_string(p.id);
    labels.push_back(std::move(label));
  }
  return labels;
}

}  // namespace refinery
