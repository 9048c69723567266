#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "refinery/errors.hpp"
#include "refinery/objectives.hpp"
#include "support/fixtures.hpp"

using namespace refinery;
using refinery::testing::kScholarshipQuery;
using refinery::testing::middle_earth;

namespace {

CategoricalSet cats(std::initializer_list<const char*> values) {
  CategoricalSet s;
  for (const char* v : values) s.insert(v);
  return s;
}

ConstraintSpec scholarship_spec() {
  return ConstraintSpec::from_json(nlohmann::json::parse(R"json({"terms": [
    {"name": "f1", "expr": "shortfall(row_count, 8)", "weight": 0.5},
    {"name": "f2", "expr": "ratio_dev(sum(count_f), sum(count_all), 0.5, 2)", "weight": 0.5}]})json"));
}

ResultSet table(std::vector<std::string> columns, std::vector<std::vector<Scalar>> rows) {
  return ResultSet{std::move(columns), std::move(rows)};
}

}  // namespace

TEST(Deviation, ScholarshipBaseline) {
  auto rs = middle_earth().execute(kScholarshipQuery);
  double psi = eval_deviation(scholarship_spec(), rs);
  EXPECT_NEAR(psi, 0.420, 0.002);
  // 3/8 shortfall and 2 * |170/635 - 1/2| ratio deviation, averaged.
  EXPECT_NEAR(psi, 0.5 * (3.0 / 8.0 + 2.0 * std::abs(170.0 / 635.0 - 0.5)), 1e-12);
}

TEST(Deviation, ZeroWhenTargetsMet) {
  auto rs = table({"count_f", "count_all"}, {});
  for (int i = 0; i < 8; ++i) rs.rows.push_back({std::int64_t{5}, std::int64_t{10}});
  EXPECT_EQ(eval_deviation(scholarship_spec(), rs), 0.0);
}

TEST(Deviation, EmptyDenominatorIsMaximal) {
  auto rs = table({"count_f", "count_all"}, {});
  auto terms = eval_terms(scholarship_spec(), rs);
  EXPECT_EQ(terms[0], 1.0);
  EXPECT_EQ(terms[1], 1.0);
}

TEST(Deviation, RandomResultsAgainstHandCodedEvaluator) {
  auto spec = ConstraintSpec::from_json(nlohmann::json::parse(R"json({"terms": [
    {"name": "rows", "expr": "shortfall(row_count, 12)", "weight": 0.2},
    {"name": "ratio", "expr": "ratio_dev(sum(a), sum(b), 0.3, 1.5)", "weight": 0.2},
    {"name": "cap", "expr": "excess(max(b), 40)", "weight": 0.2},
    {"name": "mean", "expr": "abs_dev(avg(a), 3, 0.25)", "weight": 0.1},
    {"name": "share", "expr": "shortfall(count_where(c, '=', 'x') / row_count, 0.4)", "weight": 0.2},
    {"name": "mix", "expr": "clamp01(distinct(c) / 4 - cell(0, a) * 0.01)", "weight": 0.1}]})json"));
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> n_rows(1, 20), small(0, 9);
  std::uniform_real_distribution<double> real(0, 60);
  const char* letters[] = {"x", "y", "z", "w"};
  for (int trial = 0; trial < 500; ++trial) {
    auto rs = table({"a", "b", "c"}, {});
    int n = n_rows(rng);
    for (int i = 0; i < n; ++i) {
      rs.rows.push_back({std::int64_t{small(rng)}, real(rng), std::string(letters[small(rng) % 4])});
    }
    // Oracle: direct loops over the rows.
    double sum_a = 0, sum_b = 0, max_b = -1e300, x_count = 0;
    std::set<std::string> distinct;
    for (const auto& r : rs.rows) {
      sum_a += static_cast<double>(std::get<std::int64_t>(r[0]));
      sum_b += std::get<double>(r[1]);
      max_b = std::max(max_b, std::get<double>(r[1]));
      x_count += std::get<std::string>(r[2]) == "x";
      distinct.insert(std::get<std::string>(r[2]));
    }
    auto clip = [](double v) { return std::min(1.0, std::max(0.0, v)); };
    double rows = clip((12.0 - n) / 12.0);
    double ratio = sum_b == 0 ? 1.0 : clip(1.5 * std::abs(sum_a / sum_b - 0.3));
    double cap = clip((max_b - 40.0) / 40.0);
    double mean = clip(0.25 * std::abs(sum_a / n - 3.0));
    double share = clip((0.4 - x_count / n) / 0.4);
    double mix = clip(static_cast<double>(distinct.size()) / 4.0 -
                      static_cast<double>(std::get<std::int64_t>(rs.rows[0][0])) * 0.01);
    double expected = 0.2 * rows + 0.2 * ratio + 0.2 * cap + 0.1 * mean + 0.2 * share + 0.1 * mix;
    double got = eval_deviation(spec, rs);
    ASSERT_NEAR(got, expected, 1e-12);
    ASSERT_GE(got, 0.0);
    ASSERT_LE(got, 1.0);
  }
}

TEST(Deviation, AlwaysInUnitInterval) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-100, 100);
  const char* exprs[] = {"shortfall(sum(v), 7)", "excess(avg(v), -3)", "abs_dev(min(v), 2, 10)",
                         "ratio_dev(max(v), sum(v), 0.5, 3)", "sum(v) * 3 - 2", "-row_count"};
  for (const char* e : exprs) {
    auto spec = ConstraintSpec::from_json({{"terms", {{{"expr", e}}}}});
    for (int trial = 0; trial < 200; ++trial) {
      auto rs = table({"v"}, {});
      int n = static_cast<int>(rng() % 6);
      for (int i = 0; i < n; ++i) rs.rows.push_back({u(rng)});
      double d = eval_deviation(spec, rs);
      ASSERT_GE(d, 0.0) << e;
      ASSERT_LE(d, 1.0) << e;
    }
  }
}

TEST(Deviation, ShortfallIsMonotone) {
  auto e = parse_expression("shortfall(sum(v), 50)");
  double prev = 2;
  for (int x = -10; x <= 80; ++x) {
    auto rs = table({"v"}, {{static_cast<double>(x)}});
    double d = evaluate(*e, rs);
    EXPECT_LE(d, prev);
    prev = d;
  }
}

TEST(Deviation, Errors) {
  auto rs = table({"v"}, {{1.0}});
  EXPECT_THROW(evaluate(*parse_expression("sum(nope)"), rs), UnknownColumn);
  EXPECT_THROW(evaluate(*parse_expression("sum(v) / (row_count - 1)"), rs), EvalError);
  EXPECT_EQ(evaluate(*parse_expression("div(sum(v), row_count - 1, 7)"), rs), 7.0);
  EXPECT_THROW(evaluate(*parse_expression("cell(3, v)"), rs), EvalError);
  EXPECT_THROW(parse_expression("shortfall(row_count)"), SpecError);
  EXPECT_THROW(parse_expression("bogus(1)"), SpecError);
  EXPECT_THROW(parse_expression("sum(1)"), SpecError);
  EXPECT_THROW(parse_expression("v + 1"), SpecError);
  EXPECT_THROW(parse_expression("shortfall(row_count, 8"), SpecError);
  EXPECT_THROW(ConstraintSpec::from_json({{"terms", {{{"expr", "row_count"}, {"weight", 0.4}}}}}), SpecError);
  EXPECT_THROW(ConstraintSpec::from_json({{"terms", {{{"expr", "row_count"}, {"weight", -1}}}}}), SpecError);
}

TEST(Deviation, QuotedColumnsAndFormatting) {
  auto rs = table({"COUNT(*)"}, {{std::int64_t{4}}, {std::int64_t{6}}});
  auto e = parse_expression("excess(sum(\"COUNT(*)\"), 8)");
  EXPECT_DOUBLE_EQ(evaluate(*e, rs), 0.25);
  auto again = parse_expression(format_expression(*e));
  EXPECT_EQ(format_expression(*again), format_expression(*e));
  EXPECT_EQ(referenced_columns(*e), std::vector<std::string>{"COUNT(*)"});
  auto cw = parse_expression("count_where(\"COUNT(*)\", >=, 5)");
  EXPECT_EQ(evaluate(*cw, rs), 1.0);
}

TEST(Deviation, RenderedCodeIsStable) {
  auto code = scholarship_spec().render_code();
  EXPECT_NE(code.find("f1 = shortfall(len(result), 8)"), std::string::npos);
  EXPECT_NE(code.find("f2 = ratio_dev(sum(result[\"count_f\"]), sum(result[\"count_all\"]), 0.5, 2)"),
            std::string::npos);
  EXPECT_NE(code.find("def ratio_dev"), std::string::npos);
  EXPECT_EQ(code.find("def excess"), std::string::npos);
  EXPECT_EQ(code, scholarship_spec().render_code());
}

TEST(Thresholded, Values) {
  EXPECT_EQ(thresholded_deviation(0.421, 0.1), 0.1);
  EXPECT_EQ(thresholded_deviation(0.05, 0.1), 0.05);
  EXPECT_EQ(thresholded_deviation(0.1, 0.1), 0.1);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 1000; ++i) {
    double psi = u(rng), eps = u(rng) * 0.99;
    if (psi >= eps) EXPECT_EQ(thresholded_deviation(psi, eps), eps);
  }
}

TEST(Satisfying, Boundary) {
  EXPECT_FALSE(is_satisfying(0.421, 0.1));
  EXPECT_TRUE(is_satisfying(0.1, 0.1));
  EXPECT_TRUE(is_satisfying(0, 0));
}

TEST(Distance, ExampleRefinement) {
  auto q = parse_query(kScholarshipQuery);
  DistanceSpec spec;
  Assignment refined{{3.6, cats({"Tactics"}), 80.0}};
  EXPECT_DOUBLE_EQ(eval_distance(spec, q, refined), 0.1 / 3.5 + 0.5 + 0.2);
  // Per-term rounding to three places gives the commonly quoted 0.729.
  EXPECT_NEAR(eval_distance(spec, q, refined), 0.729, 5e-4);
  EXPECT_EQ(eval_distance(spec, q, baseline_assignment(q)), 0.0);
  EXPECT_EQ(spec.max_distance(q), 3.0);
}

TEST(Distance, BoundedClampsEachTerm) {
  auto q = parse_query("SELECT * FROM t WHERE x > 2 AND y < 10");
  DistanceSpec spec;
  Assignment a{{8.0, 15.0}};
  EXPECT_DOUBLE_EQ(eval_distance(spec, q, a), 3.0 + 0.5);
  EXPECT_DOUBLE_EQ(bounded_distance(spec, q, a), 1.0 + 0.5);
}

TEST(Distance, ZeroGuard) {
  auto q = parse_query("SELECT * FROM t WHERE x > 0");
  DistanceSpec spec;
  EXPECT_EQ(eval_distance(spec, q, Assignment{{0.0}}), 0.0);
  EXPECT_GT(eval_distance(spec, q, Assignment{{1e-12}}), 0.0);
}

TEST(Distance, ZeroIffBaseline) {
  auto q = parse_query(kScholarshipQuery);
  DistanceSpec spec;
  EXPECT_GT(eval_distance(spec, q, Assignment{{3.5, cats({"Tactics", "Archery"}), 101.0}}), 0.0);
  EXPECT_GT(eval_distance(spec, q, Assignment{{3.5, cats({"Tactics", "Archery", "Melee"}), 100.0}}), 0.0);
}

TEST(Distance, OutcomeJaccard) {
  DistanceSpec spec{DistanceKind::outcome_jaccard};
  auto q = parse_query(kScholarshipQuery);
  auto a = table({"r"}, {{std::string("x")}, {std::string("x")}, {std::string("y")}});
  auto b = table({"r"}, {{std::string("x")}, {std::string("z")}});
  auto c = table({"r"}, {{std::string("w")}});
  EXPECT_EQ(eval_distance(spec, q, baseline_assignment(q), &a, &c), 1.0);
  EXPECT_EQ(eval_distance(spec, q, baseline_assignment(q), &a, &a), 0.0);
  // multiset: intersection {x}, union {x, x, y, z}
  EXPECT_DOUBLE_EQ(outcome_jaccard(a, b), 0.75);
  EXPECT_EQ(outcome_jaccard(a, b), outcome_jaccard(b, a));
  EXPECT_EQ(outcome_jaccard(table({"r"}, {}), table({"r"}, {})), 0.0);
  EXPECT_THROW(eval_distance(spec, q, baseline_assignment(q)), MissingResults);
  EXPECT_EQ(spec.max_distance(q), 1.0);
}

TEST(Distance, SpecJson) {
  EXPECT_EQ(DistanceSpec::from_json({{"kind", "outcome_jaccard"}}).kind, DistanceKind::outcome_jaccard);
  EXPECT_EQ(DistanceSpec::from_json("predicate_based").kind, DistanceKind::predicate_based);
  EXPECT_THROW(DistanceSpec::from_json({{"kind", "euclid"}}), SpecError);
}

TEST(Optimality, Formula) {
  EXPECT_DOUBLE_EQ(optimality(0.729, 0.729, 3), 1.0);
  EXPECT_DOUBLE_EQ(optimality(3, 0.729, 3), 0.0);
  EXPECT_DOUBLE_EQ(optimality(5, 0.729, 3), 0.0);
  EXPECT_DOUBLE_EQ(optimality(1, 0, 2), 0.5);
  EXPECT_THROW(optimality(1, 2, 2), DegenerateDenominator);
}
