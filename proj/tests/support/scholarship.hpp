#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "refinery/proposal.hpp"
#include "support/fixtures.hpp"

namespace refinery::testing {

inline CategoricalSet cats(std::initializer_list<const char*> values) {
  CategoricalSet s;
  for (const char* v : values) s.insert(v);
  return s;
}

// The running scholarship instance: at least 8 groups, female share in [0.5, 2].
struct ScholarshipSetup {
  ParsedQuery query;
  ConstraintSpec constraints;
  DistanceSpec distance;
  double epsilon = 0.1;
  SubspaceDomain domain;
  InstanceBrief brief;
};

inline ConstraintSpec scholarship_constraints() {
  return ConstraintSpec::from_json(nlohmann::json::parse(R"json({"terms": [
    {"name": "f1", "expr": "shortfall(row_count, 8)", "weight": 0.5},
    {"name": "f2", "expr": "ratio_dev(sum(count_f), sum(count_all), 0.5, 2)", "weight": 0.5}]})json"));
}

inline const ScholarshipSetup& scholarship() {
  static const ScholarshipSetup s = [] {
    ScholarshipSetup x;
    x.query = parse_query(kScholarshipQuery);
    x.constraints = scholarship_constraints();
    x.domain = derive_domain(middle_earth(), x.query);
    x.brief = InstanceBrief::build(middle_earth().describe_for_query(x.query), x.query, x.constraints, x.distance,
                                   x.epsilon, x.domain);
    return x;
  }();
  return s;
}

// GPA in [3.4, 3.7], Tactics ⊆ major ⊆ {Tactics, Melee, Stealth}, COUNT(*) in [70, 120].
inline Subspace example_theta() {
  return Subspace{{NumericRange{3.4, 3.7}, CategoricalRange{cats({"Tactics"}), cats({"Tactics", "Melee", "Stealth"})},
                   NumericRange{70, 120, true}}};
}

inline ProposalContext base_context() {
  const auto& s = scholarship();
  ProposalContext ctx;
  ctx.query = &s.query;
  ctx.domain = &s.domain;
  ctx.brief = &s.brief;
  ctx.rounds = 10;
  ctx.samples = 5;
  return ctx;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Compares against tests/golden/<name>; REFINERY_UPDATE_GOLDEN=1 rewrites it.
inline bool matches_golden(const std::string& name, const std::string& text) {
  const auto path = source_dir() / "tests" / "golden" / name;
  if (const char* u = std::getenv("REFINERY_UPDATE_GOLDEN"); u && std::string(u) == "1") {
    std::ofstream(path, std::ios::binary) << text;
    return true;
  }
  return std::filesystem::exists(path) && read_file(path) == text;
}

}  // namespace refinery::testing
