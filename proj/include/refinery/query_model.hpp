#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace refinery {

enum class Clause { where, having };
enum class AttributeKind { base, derived };
enum class CompareOp { lt, le, eq, ge, gt, in };
enum class ValueKind { numeric, categorical };

// Sorted, duplicate-free set of category values.
using CategoricalSet = std::set<std::string>;

// One refinable literal: a real number or a set of categories.
using Literal = std::variant<double, CategoricalSet>;

// Half-open byte range into a SQL text.
struct SourceSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  bool empty() const noexcept { return begin >= end; }
  std::size_t size() const noexcept { return end > begin ? end - begin : 0; }
  friend bool operator==(const SourceSpan&, const SourceSpan&) = default;
};

struct ColumnRef {
  std::string table;  // resolved table name, empty when unqualified
  std::string column;
  friend bool operator==(const ColumnRef&, const ColumnRef&) = default;
};

struct RefinablePredicate {
  std::size_t id = 0;
  std::string attribute;  // source text of the compared expression, e.g. "COUNT(*)"
  AttributeKind attribute_kind = AttributeKind::base;
  Clause clause = Clause::where;
  CompareOp op = CompareOp::gt;
  Literal literal;
  // Bytes rewritten by apply_assignment. For IN predicates this is the list
  // between the parentheses.
  SourceSpan literal_span;
  // Set for base attributes; `table` holds the qualifier as written (a table
  // name or alias), empty when unqualified.
  std::optional<ColumnRef> column;

  ValueKind value_kind() const noexcept {
    return op == CompareOp::in ? ValueKind::categorical : ValueKind::numeric;
  }
};

struct TableRef {
  std::string name;
  std::string alias;  // empty when the table is not aliased
};

// Clause bodies of the outermost query block, without their keywords.
struct ClauseSpans {
  SourceSpan select_list;
  std::optional<SourceSpan> from;
  std::optional<SourceSpan> where;
  std::optional<SourceSpan> group_by;
  std::optional<SourceSpan> having;
};

struct ParsedQuery {
  std::string original_sql;
  std::vector<RefinablePredicate> predicates;
  std::vector<TableRef> tables;
  std::vector<ColumnRef> columns;
  ClauseSpans clauses;

  std::string_view text(SourceSpan span) const {
    return std::string_view(original_sql).substr(span.begin, span.size());
  }
  // Resolves a table name or alias to the table name it denotes.
  std::optional<std::string> resolve_table(std::string_view name_or_alias) const;
};

// A refinement assignment: one literal per refinable predicate, in id order.
struct Assignment {
  std::vector<Literal> values;
  friend bool operator==(const Assignment&, const Assignment&) = default;
};

// Parses a single SELECT statement (SQLite dialect) and extracts the
// refinable predicates of its outermost WHERE and HAVING clauses in document
// order. Throws SyntaxError or NoRefinablePredicates.
ParsedQuery parse_query(std::string_view sql);

Assignment baseline_assignment(const ParsedQuery& query);

// Rewrites the literal positions of `query` with the values of `assignment`.
// Throws ArityMismatch / KindMismatch.
std::string apply_assignment(const ParsedQuery& query, const Assignment& assignment);

// Throws ArityMismatch / KindMismatch when `assignment` does not fit `query`.
void check_assignment(const ParsedQuery& query, const Assignment& assignment);

// Shortest text that parses back to exactly `value` ("80", "3.6", "1e+20").
std::string format_number(double value);
std::string quote_string(std::string_view value);
std::string format_literal(const Literal& literal);
std::string to_string(CompareOp op);
std::string to_string(Clause clause);

// Stable text key for caching and deduplication.
std::string canonical_key(const Assignment& assignment);

// Unique display labels, one per predicate. Normally the attribute text; a
// repeated attribute gets its operator appended ("GPA >=", "GPA <=").
std::vector<std::string> predicate_labels(const ParsedQuery& query);

}  // namespace refinery
