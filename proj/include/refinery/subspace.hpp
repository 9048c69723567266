#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "refinery/catalog.hpp"
#include "refinery/query_model.hpp"

namespace refinery {

// Closed interval. `integral` marks predicates over integer-valued
// attributes: samples and repaired literals are snapped to integers.
struct NumericRange {
  double lo = 0;
  double hi = 0;
  bool integral = false;
  friend bool operator==(const NumericRange&, const NumericRange&) = default;
};

// Set-inclusion range: admissible sets C satisfy cmin ⊆ C ⊆ cmax.
struct CategoricalRange {
  CategoricalSet cmin;
  CategoricalSet cmax;
  friend bool operator==(const CategoricalRange&, const CategoricalRange&) = default;
};

using PredicateRange = std::variant<NumericRange, CategoricalRange>;

struct Subspace {
  std::vector<PredicateRange> ranges;  // one per predicate, in id order
  friend bool operator==(const Subspace&, const Subspace&) = default;
};

enum class DerivedBoundsMode { unfiltered, filtered, hull };

// Result of one min/max probe for a predicate attribute.
struct ProbeBounds {
  double lo = 0;
  double hi = 0;
  bool integral = false;
  std::string sql;
};

struct DomainEntry {
  PredicateRange range;
  // For numeric predicates: the probe over all rows, and the probe with the
  // WHERE clause kept at its baseline literals (derived attributes only).
  std::optional<ProbeBounds> unfiltered;
  std::optional<ProbeBounds> filtered;
  bool from_static_bounds = false;
  bool from_fallback = false;
};

struct SubspaceDomain {
  std::vector<DomainEntry> entries;

  Subspace as_subspace() const;
  // [{"attribute": ..., "operator": ..., "value_range": {"min_val": .., "max_val": ..}}, ...]
  nlohmann::ordered_json to_json(const ParsedQuery& query) const;
  std::string render(const ParsedQuery& query) const;
};

struct DomainOptions {
  DerivedBoundsMode mode = DerivedBoundsMode::unfiltered;
  // Fallback [lo, hi] per predicate id, used when probing yields nothing.
  std::map<std::size_t, std::pair<double, double>> static_bounds;
  // Last resort after probing and static bounds, e.g. a model-backed guess.
  std::function<std::optional<std::pair<double, double>>(const RefinablePredicate&)> fallback_bounds;
};

// Computes S+(Q). Base numeric attributes get the column min/max, base
// categorical ones the distinct values, and derived attributes the min/max
// of the aggregate over groups. Throws ProbeFailure when a probe cannot run
// and no static bound is configured.
SubspaceDomain derive_domain(const Catalog& catalog, const ParsedQuery& query, const DomainOptions& options = {});

bool contains(const PredicateRange& range, const Literal& value);
bool contains(const Subspace& subspace, const Assignment& assignment);  // ArityMismatch
// Range-wise containment of `inner` in `outer`.
bool within(const Subspace& inner, const Subspace& outer);

// Intersects every range with the domain. Integral numeric ranges are
// tightened to integer endpoints when an integer lies inside. Throws
// EmptyRange, ArityMismatch or KindMismatch.
Subspace clamp_to_domain(const SubspaceDomain& domain, const Subspace& subspace);

// Uniform draw from the subspace; see NumericRange::integral.
Assignment sample_within(const Subspace& subspace, std::mt19937_64& rng);

// Coordinate-wise repair of an assignment into the subspace: numeric values
// move to the nearest admissible value, sets become (C ∩ cmax) ∪ cmin.
Assignment clamp_into(const Subspace& subspace, const Assignment& assignment);

// Every assignment of a subspace whose numeric ranges are integral or
// single points, in lexicographic order with the last predicate fastest.
// nullopt when a range is real-valued or there are more than `limit`.
std::optional<std::vector<Assignment>> enumerate_assignments(const Subspace& subspace, std::size_t limit = 1'000'000);

// {"GPA": [3.4, 3.8], "major": {"cmin": [], "cmax": [...]}, ...}
nlohmann::ordered_json to_json(const Subspace& subspace, const ParsedQuery& query);
std::string canonical_key(const Subspace& subspace);

// The kinds must line up with the query's predicates.
void check_subspace(const ParsedQuery& query, const Subspace& subspace);

}  // namespace refinery
