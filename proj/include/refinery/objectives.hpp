#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "refinery/catalog.hpp"
#include "refinery/query_model.hpp"

namespace refinery {

// Expression tree of the deviation language. Grammar:
//
//   expr    := term (('+' | '-') term)*
//   term    := factor (('*' | '/') factor)*
//   factor  := number | '-' factor | '(' expr ')' | call | 'row_count'
//   call    := name '(' args ')'
//
// Primitives (results clamped to [0,1]):
//   shortfall(x, target)          max(0, (target - x) / |target|)
//   excess(x, cap)                max(0, (x - cap) / |cap|)
//   ratio_dev(x, y, target, scale) scale * |x / y - target|, 1 when y = 0
//   abs_dev(x, target, scale)     scale * |x - target|
// Features over the result set (column names bare or "double quoted"):
//   row_count, sum(c), avg(c), min(c), max(c), distinct(c),
//   count_where(c, '<op>', value), cell(row, c)
// Helpers: abs(x), min(x, y), max(x, y), clamp01(x), div(x, y, fallback).
struct Expr {
  enum class Kind { number, row_count, negate, binary, call, column, string };
  Kind kind = Kind::number;
  double number = 0;
  std::string text;  // function name, operator, column or string literal
  std::vector<std::shared_ptr<const Expr>> args;
};
using ExprPtr = std::shared_ptr<const Expr>;

ExprPtr parse_expression(std::string_view text);  // SpecError
// Canonical source text; parse_expression(format_expression(e)) is equivalent to e.
std::string format_expression(const Expr& expr);
// Evaluates against a result set. avg/min/max of an empty column yield NaN,
// which primitives turn into 1. Throws UnknownColumn or EvalError.
double evaluate(const Expr& expr, const ResultSet& result);
// Names of the result columns an expression refers to.
std::vector<std::string> referenced_columns(const Expr& expr);

struct DeviationTerm {
  std::string name;
  std::string source;
  ExprPtr expr;
  double weight = 0;
};

// Weighted average of sub-deviations. Weights are non-negative and sum to 1.
struct ConstraintSpec {
  std::vector<DeviationTerm> terms;

  // {"terms": [{"name": "f1", "expr": "shortfall(row_count, 8)", "weight": 0.5}, ...]}
  // Weights may be omitted on every term, meaning equal weights.
  static ConstraintSpec from_json(const nlohmann::json& doc);  // SpecError
  nlohmann::ordered_json to_json() const;
  std::string render_code() const;
};

double eval_deviation(const ConstraintSpec& spec, const ResultSet& result);
// Per-term values before weighting.
std::vector<double> eval_terms(const ConstraintSpec& spec, const ResultSet& result);

inline double thresholded_deviation(double deviation, double epsilon) {
  return deviation < epsilon ? deviation : epsilon;
}
inline bool is_satisfying(double deviation, double epsilon) { return deviation <= epsilon; }

enum class DistanceKind { predicate_based, outcome_jaccard };

struct DistanceSpec {
  DistanceKind kind = DistanceKind::predicate_based;

  static DistanceSpec from_json(const nlohmann::json& doc);  // {"kind": "predicate_based" | "outcome_jaccard"}
  nlohmann::ordered_json to_json() const;
  std::string render_code() const;
  // |Preds(Q)| for predicate-based distances, 1 for outcome distances.
  double max_distance(const ParsedQuery& query) const;
};

inline constexpr double kDistanceZeroGuard = 1e-9;

// Raw distance; numeric predicate terms are unbounded.
double eval_distance(const DistanceSpec& spec, const ParsedQuery& query, const Assignment& assignment,
                     const ResultSet* baseline_result = nullptr, const ResultSet* refined_result = nullptr);
// Distance with every predicate-based term clamped to 1, for optimality scoring.
double bounded_distance(const DistanceSpec& spec, const ParsedQuery& query, const Assignment& assignment,
                        const ResultSet* baseline_result = nullptr, const ResultSet* refined_result = nullptr);

double jaccard_distance(const CategoricalSet& a, const CategoricalSet& b);
// 1 - |A ∩ B| / |A ∪ B| over row multisets; two empty results have distance 0.
double outcome_jaccard(const ResultSet& a, const ResultSet& b);

// (max - distance) / (max - optimum), with distance clamped to max.
// Throws DegenerateDenominator when max equals optimum.
double optimality(double distance, double optimum, double max_distance);

}  // namespace refinery
