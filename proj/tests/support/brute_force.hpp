#pragma once

// Exhaustive reference answers for enumerable instances.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "refinery/bench.hpp"
#include "refinery/engine.hpp"
#include "support/fixtures.hpp"

namespace refinery::testing {

// Every assignment of an integer/categorical subspace, built range by range
// without the library's enumeration.
inline std::vector<Assignment> naive_assignments(const Subspace& s) {
  std::vector<Assignment> out{Assignment{}};
  for (const auto& range : s.ranges) {
    std::vector<Literal> options;
    if (const auto* n = std::get_if<NumericRange>(&range)) {
      if (!n->integral) throw std::logic_error("real-valued range");
      for (double v = std::ceil(n->lo); v <= n->hi; v += 1) options.emplace_back(v);
    } else {
      const auto& c = std::get<CategoricalRange>(range);
      std::vector<std::string> free;
      for (const auto& x : c.cmax) {
        if (!c.cmin.count(x)) free.push_back(x);
      }
      for (std::size_t mask = 0; mask < (std::size_t{1} << free.size()); ++mask) {
        CategoricalSet set = c.cmin;
        for (std::size_t b = 0; b < free.size(); ++b) {
          if (mask >> b & 1) set.insert(free[b]);
        }
        options.emplace_back(std::move(set));
      }
    }
    std::vector<Assignment> next;
    for (const auto& a : out) {
      for (const auto& o : options) {
        Assignment b = a;
        b.values.push_back(o);
        next.push_back(std::move(b));
      }
    }
    out = std::move(next);
  }
  return out;
}

struct BruteForce {
  std::size_t space = 0;
  std::size_t satisfying = 0;
  double best_distance = 0;  // raw, among satisfying; only valid when satisfying > 0
  double best_bounded = 0;
  std::vector<Assignment> argmin;  // every satisfying assignment at best_distance
  double min_deviation = 1;
};

inline BruteForce brute_force(RefinementEngine& engine) {
  BruteForce bf;
  const auto& inst = engine.instance();
  for (const auto& a : naive_assignments(engine.domain().as_subspace())) {
    ++bf.space;
    const Evaluation e = engine.evaluate(a);
    bf.min_deviation = std::min(bf.min_deviation, e.deviation);
    if (e.deviation > inst.epsilon) continue;
    if (bf.satisfying == 0 || e.distance < bf.best_distance) {
      bf.best_distance = e.distance;
      bf.argmin.clear();
    }
    if (e.distance == bf.best_distance) bf.argmin.push_back(a);
    ++bf.satisfying;
  }
  if (!bf.argmin.empty()) bf.best_bounded = bounded_distance(inst.distance, engine.query(), bf.argmin.front());
  engine.clear_cache();
  return bf;
}

inline bool among(const std::vector<Assignment>& set, const Assignment& a) {
  for (const auto& x : set) {
    if (x == a) return true;
  }
  return false;
}

inline std::filesystem::path mini(const std::string& name) {
  return source_dir() / "benchmarks" / "mini" / (name + ".json");
}

inline const char* const kMiniInstances[] = {"complex_depts",   "complex_regions", "diversity_depts", "diversity_sites",
                                             "range_headcount", "range_ratio",     "topk_south",      "topk_women"};

// Scripted strategies that walk the whole domain once, with enough
// iterations to reach every assignment and no early stop.
inline void make_exhaustive(RefinementInstance& inst, std::size_t space) {
  StrategyConfig s;
  s.kind = StrategyKind::scripted;
  s.exhaustive = true;
  inst.engine.subspace_strategy = inst.engine.assignment_strategy = s;
  inst.engine.iterations = (space + inst.engine.samples - 1) / inst.engine.samples;
  inst.engine.patience = inst.engine.iterations;
}

}  // namespace refinery::testing
