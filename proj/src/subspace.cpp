#include "refinery/subspace.hpp"

#include <algorithm>
#include <cmath>

#include "refinery/errors.hpp"

namespace refinery {

namespace {

using oj = nlohmann::ordered_json;

std::string quote_ident(std::string_view name) {
  std::string out = "\"";
  for (char c : name) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string text_of(const Scalar& v) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  if (const auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
  if (const auto* d = std::get_if<double>(&v)) return format_number(*d);
  return {};
}

// MIN/MAX probe; nullopt when the probe returns no non-NULL value.
std::optional<ProbeBounds> run_probe(const Catalog& catalog, std::string sql) {
  ResultSet rs = catalog.execute(sql);
  if (rs.rows.empty() || rs.rows[0].size() < 2) return std::nullopt;
  auto lo = as_number(rs.rows[0][0]);
  auto hi = as_number(rs.rows[0][1]);
  if (!lo || !hi) return std::nullopt;
  ProbeBounds b;
  b.lo = *lo;
  b.hi = *hi;
  b.integral = std::holds_alternative<std::int64_t>(rs.rows[0][0]) &&
               std::holds_alternative<std::int64_t>(rs.rows[0][1]);
  b.sql = std::move(sql);
  return b;
}

double snap_integral(double v, const NumericRange& r) {
  double lo = std::ceil(r.lo), hi = std::floor(r.hi);
  if (lo > hi) return std::clamp(v, r.lo, r.hi);
  return std::clamp(std::round(v), lo, hi);
}

}  // namespace

Subspace SubspaceDomain::as_subspace() const {
  Subspace s;
  for (const auto& e : entries) s.ranges.push_back(e.range);
  return s;
}

oj SubspaceDomain::to_json(const ParsedQuery& query) const {
  auto labels = predicate_labels(query);
  oj out = oj::array();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& p = query.predicates.at(i);
    oj e;
    e["attribute"] = p.attribute;
    e["operator"] = to_string(p.op);
    if (const auto* n = std::get_if<NumericRange>(&entries[i].range)) {
      e["value_range"] = {{"min_val", n->lo}, {"max_val", n->hi}};
      if (n->integral) e["integer"] = true;
    } else {
      const auto& c = std::get<CategoricalRange>(entries[i].range);
      e["value_range"] = {{"min_val", c.cmin}, {"max_val", c.cmax}};
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::string SubspaceDomain::render(const ParsedQuery& query) const { return to_json(query).dump(2); }

SubspaceDomain derive_domain(const Catalog& catalog, const ParsedQuery& query, const DomainOptions& options) {
  if (!query.clauses.from) throw ProbeFailure("query has no FROM clause to probe");
  const std::string from(query.text(*query.clauses.from));
  const std::string where = query.clauses.where ? std::string(query.text(*query.clauses.where)) : "";
  const std::string group_by = query.clauses.group_by ? std::string(query.text(*query.clauses.group_by)) : "";

  SubspaceDomain dom;
  for (const auto& p : query.predicates) {
    DomainEntry entry;
    std::optional<ResolvedColumn> column;
    if (p.column) column = catalog.resolve(query, *p.column);

    if (p.value_kind() == ValueKind::categorical) {
      std::string sql = column ? "SELECT DISTINCT " + quote_ident(column->column->name) + " FROM " +
                                     quote_ident(column->table->name)
                               : "SELECT DISTINCT " + p.attribute + " FROM " + from;
      CategoricalRange r;
      try {
        for (const auto& row : catalog.execute(sql).rows) {
          if (!std::holds_alternative<std::monostate>(row[0])) r.cmax.insert(text_of(row[0]));
        }
      } catch (const ExecError& e) {
        throw ProbeFailure("cannot enumerate values of '" + p.attribute + "': " + e.what());
      }
      entry.range = std::move(r);
      dom.entries.push_back(std::move(entry));
      continue;
    }

    std::optional<ProbeBounds> chosen;
    try {
      if (p.clause == Clause::having) {
        auto probe = [&](bool filtered) {
          std::string inner = "SELECT " + p.attribute + " AS v FROM " + from;
          if (filtered && !where.empty()) inner += " WHERE " + where;
          if (!group_by.empty()) inner += " GROUP BY " + group_by;
          return run_probe(catalog, "SELECT MIN(v), MAX(v) FROM (" + inner + ")");
        };
        entry.unfiltered = probe(false);
        entry.filtered = where.empty() ? entry.unfiltered : probe(true);
        switch (options.mode) {
          case DerivedBoundsMode::unfiltered: chosen = entry.unfiltered; break;
          case DerivedBoundsMode::filtered: chosen = entry.filtered; break;
          case DerivedBoundsMode::hull:
            chosen = entry.unfiltered;
            if (chosen && entry.filtered) {
              chosen->lo = std::min(chosen->lo, entry.filtered->lo);
              chosen->hi = std::max(chosen->hi, entry.filtered->hi);
              chosen->integral = chosen->integral && entry.filtered->integral;
            } else if (!chosen) {
              chosen = entry.filtered;
            }
            break;
        }
      } else if (column) {
        const std::string col = quote_ident(column->column->name);
        entry.unfiltered = run_probe(catalog, "SELECT MIN(" + col + "), MAX(" + col + ") FROM " +
                                                  quote_ident(column->table->name));
        if (entry.unfiltered && column->column->type == ColumnType::integer) entry.unfiltered->integral = true;
        chosen = entry.unfiltered;
      } else {
        entry.unfiltered = run_probe(catalog, "SELECT MIN(" + p.attribute + "), MAX(" + p.attribute + ") FROM " + from);
        chosen = entry.unfiltered;
      }
    } catch (const ExecError&) {
      chosen.reset();
    }

    NumericRange r;
    if (chosen) {
      r = {chosen->lo, chosen->hi, chosen->integral};
    } else if (auto it = options.static_bounds.find(p.id); it != options.static_bounds.end()) {
      r = {it->second.first, it->second.second, false};
      entry.from_static_bounds = true;
    } else if (auto guess = options.fallback_bounds ? options.fallback_bounds(p) : std::nullopt) {
      r = {guess->first, guess->second, false};
      entry.from_fallback = true;
    } else {
      throw ProbeFailure("no min/max could be probed for '" + p.attribute + "' and no static bounds are configured");
    }
    if (r.lo > r.hi) throw ProbeFailure("static bounds for '" + p.attribute + "' are inverted");
    entry.range = r;
    dom.entries.push_back(std::move(entry));
  }
  return dom;
}

bool contains(const PredicateRange& range, const Literal& value) {
  if (const auto* n = std::get_if<NumericRange>(&range)) {
    const auto* v = std::get_if<double>(&value);
    return v && *v >= n->lo && *v <= n->hi;
  }
  const auto& c = std::get<CategoricalRange>(range);
  const auto* s = std::get_if<CategoricalSet>(&value);
  return s && std::includes(s->begin(), s->end(), c.cmin.begin(), c.cmin.end()) &&
         std::includes(c.cmax.begin(), c.cmax.end(), s->begin(), s->end());
}

bool contains(const Subspace& subspace, const Assignment& assignment) {
  if (subspace.ranges.size() != assignment.values.size()) {
    throw ArityMismatch("subspace has " + std::to_string(subspace.ranges.size()) + " ranges, assignment has " +
                        std::to_string(assignment.values.size()) + " values");
  }
  for (std::size_t i = 0; i < subspace.ranges.size(); ++i) {
    if (!contains(subspace.ranges[i], assignment.values[i])) return false;
  }
  return true;
}

bool within(const Subspace& inner, const Subspace& outer) {
  if (inner.ranges.size() != outer.ranges.size()) throw ArityMismatch("subspaces differ in arity");
  for (std::size_t i = 0; i < inner.ranges.size(); ++i) {
    const auto* a = std::get_if<NumericRange>(&inner.ranges[i]);
    const auto* b = std::get_if<NumericRange>(&outer.ranges[i]);
    if (a && b) {
      if (a->lo < b->lo || a->hi > b->hi) return false;
      continue;
    }
    const auto* ca = std::get_if<CategoricalRange>(&inner.ranges[i]);
    const auto* cb = std::get_if<CategoricalRange>(&outer.ranges[i]);
    if (!ca || !cb) return false;
    if (!std::includes(ca->cmin.begin(), ca->cmin.end(), cb->cmin.begin(), cb->cmin.end())) return false;
    if (!std::includes(cb->cmax.begin(), cb->cmax.end(), ca->cmax.begin(), ca->cmax.end())) return false;
  }
  return true;
}

Subspace clamp_to_domain(const SubspaceDomain& domain, const Subspace& subspace) {
  if (domain.entries.size() != subspace.ranges.size()) {
    throw ArityMismatch("subspace has " + std::to_string(subspace.ranges.size()) + " ranges, domain has " +
                        std::to_string(domain.entries.size()));
  }
  Subspace out;
  for (std::size_t i = 0; i < subspace.ranges.size(); ++i) {
    const auto& d = domain.entries[i].range;
    if (const auto* dn = std::get_if<NumericRange>(&d)) {
      const auto* n = std::get_if<NumericRange>(&subspace.ranges[i]);
      if (!n) throw KindMismatch("range " + std::to_string(i) + " should be numeric");
      NumericRange r{std::max(n->lo, dn->lo), std::min(n->hi, dn->hi), dn->integral};
      if (!(r.lo <= r.hi)) throw EmptyRange("range " + std::to_string(i) + " does not intersect the domain");
      if (r.integral && std::ceil(r.lo) <= std::floor(r.hi)) {
        r.lo = std::ceil(r.lo);
        r.hi = std::floor(r.hi);
      }
      out.ranges.push_back(r);
    } else {
      const auto& dc = std::get<CategoricalRange>(d);
      const auto* c = std::get_if<CategoricalRange>(&subspace.ranges[i]);
      if (!c) throw KindMismatch("range " + std::to_string(i) + " should be categorical");
      CategoricalRange r;
      std::set_intersection(c->cmax.begin(), c->cmax.end(), dc.cmax.begin(), dc.cmax.end(),
                            std::inserter(r.cmax, r.cmax.end()));
      std::set_intersection(c->cmin.begin(), c->cmin.end(), r.cmax.begin(), r.cmax.end(),
                            std::inserter(r.cmin, r.cmin.end()));
      out.ranges.push_back(std::move(r));
    }
  }
  return out;
}

Assignment sample_within(const Subspace& subspace, std::mt19937_64& rng) {
  Assignment a;
  for (const auto& range : subspace.ranges) {
    if (const auto* n = std::get_if<NumericRange>(&range)) {
      if (!(n->lo <= n->hi)) throw EmptyRange("cannot sample from an inverted interval");
      const double ilo = std::ceil(n->lo), ihi = std::floor(n->hi);
      if (n->integral && ilo <= ihi) {
        std::uniform_int_distribution<std::int64_t> dist(static_cast<std::int64_t>(ilo), static_cast<std::int64_t>(ihi));
        a.values.emplace_back(static_cast<double>(dist(rng)));
      } else if (n->lo == n->hi) {
        a.values.emplace_back(n->lo);
      } else {
        std::uniform_real_distribution<double> dist(n->lo, n->hi);
        a.values.emplace_back(std::clamp(dist(rng), n->lo, n->hi));
      }
    } else {
      const auto& c = std::get<CategoricalRange>(range);
      if (!std::includes(c.cmax.begin(), c.cmax.end(), c.cmin.begin(), c.cmin.end())) {
        throw EmptyRange("categorical range has cmin outside cmax");
      }
      CategoricalSet s = c.cmin;
      for (const auto& v : c.cmax) {
        if (c.cmin.count(v)) continue;
        if (rng() & 1u) s.insert(v);
      }
      a.values.emplace_back(std::move(s));
    }
  }
  return a;
}

Assignment clamp_into(const Subspace& subspace, const Assignment& assignment) {
  if (subspace.ranges.size() != assignment.values.size()) {
    throw ArityMismatch("assignment has " + std::to_string(assignment.values.size()) + " values, subspace has " +
                        std::to_string(subspace.ranges.size()) + " ranges");
  }
  Assignment out;
  for (std::size_t i = 0; i < subspace.ranges.size(); ++i) {
    const auto& value = assignment.values[i];
    if (const auto* n = std::get_if<NumericRange>(&subspace.ranges[i])) {
      const auto* v = std::get_if<double>(&value);
      if (!v) throw KindMismatch("value " + std::to_string(i) + " should be numeric");
      double x = std::isnan(*v) ? n->lo : std::clamp(*v, n->lo, n->hi);
      if (n->integral) x = snap_integral(x, *n);
      out.values.emplace_back(x);
    } else {
      const auto& c = std::get<CategoricalRange>(subspace.ranges[i]);
      const auto* s = std::get_if<CategoricalSet>(&value);
      if (!s) throw KindMismatch("value " + std::to_string(i) + " should be a set");
      CategoricalSet r = c.cmin;
      for (const auto& v : *s) {
        if (c.cmax.count(v)) r.insert(v);
      }
      out.values.emplace_back(std::move(r));
    }
  }
  return out;
}

std::optional<std::vector<Assignment>> enumerate_assignments(const Subspace& subspace, std::size_t limit) {
  std::vector<std::vector<Literal>> axes;
  double total = 1;
  for (const auto& range : subspace.ranges) {
    std::vector<Literal> axis;
    if (const auto* n = std::get_if<NumericRange>(&range)) {
      if (n->lo == n->hi) {
        axis.emplace_back(n->lo);
      } else if (n->integral) {
        const double count = std::floor(n->hi) - std::ceil(n->lo) + 1;
        if (count > static_cast<double>(limit)) return std::nullopt;
        for (double v = std::ceil(n->lo); v <= n->hi; v += 1) axis.emplace_back(v);
      } else {
        return std::nullopt;
      }
    } else {
      const auto& c = std::get<CategoricalRange>(range);
      std::vector<std::string> optional;
      for (const auto& v : c.cmax) {
        if (!c.cmin.count(v)) optional.push_back(v);
      }
      if (optional.size() >= 40 || std::ldexp(1.0, static_cast<int>(optional.size())) > static_cast<double>(limit)) {
        return std::nullopt;
      }
      for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << optional.size()); ++mask) {
        CategoricalSet s = c.cmin;
        for (std::size_t b = 0; b < optional.size(); ++b) {
          if (mask >> b & 1u) s.insert(optional[b]);
        }
        axis.emplace_back(std::move(s));
      }
    }
    total *= static_cast<double>(axis.size());
    if (total > static_cast<double>(limit)) return std::nullopt;
    axes.push_back(std::move(axis));
  }
  std::vector<Assignment> out;
  if (axes.empty()) return out;
  out.reserve(static_cast<std::size_t>(total));
  std::vector<std::size_t> cursor(axes.size(), 0);
  while (true) {
    Assignment a;
    for (std::size_t i = 0; i < axes.size(); ++i) a.values.push_back(axes[i][cursor[i]]);
    out.push_back(std::move(a));
    std::size_t k = axes.size();
    while (k > 0 && ++cursor[k - 1] == axes[k - 1].size()) cursor[--k] = 0;
    if (k == 0) break;
  }
  return out;
}

oj to_json(const Subspace& subspace, const ParsedQuery& query) {
  auto labels = predicate_labels(query);
  oj out = oj::object();
  for (std::size_t i = 0; i < subspace.ranges.size(); ++i) {
    const std::string& label = labels.at(i);
    if (const auto* n = std::get_if<NumericRange>(&subspace.ranges[i])) {
      out[label] = oj::array({n->lo, n->hi});
    } else {
      const auto& c = std::get<CategoricalRange>(subspace.ranges[i]);
      out[label] = {{"cmin", c.cmin}, {"cmax", c.cmax}};
    }
  }
  return out;
}

std::string canonical_key(const Subspace& subspace) {
  std::string key;
  for (const auto& range : subspace.ranges) {
    if (!key.empty()) key += " | ";
    if (const auto* n = std::get_if<NumericRange>(&range)) {
      key += "[" + format_number(n->lo) + "," + format_number(n->hi) + "]";
    } else {
      const auto& c = std::get<CategoricalRange>(range);
      key += format_literal(c.cmin) + "<=" + format_literal(c.cmax);
    }
  }
  return key;
}

void check_subspace(const ParsedQuery& query, const Subspace& subspace) {
  if (query.predicates.size() != subspace.ranges.size()) {
    throw ArityMismatch("query has " + std::to_string(query.predicates.size()) + " predicates, subspace has " +
                        std::to_string(subspace.ranges.size()) + " ranges");
  }
  for (std::size_t i = 0; i < subspace.ranges.size(); ++i) {
    bool numeric = std::holds_alternative<NumericRange>(subspace.ranges[i]);
    if (numeric != (query.predicates[i].value_kind() == ValueKind::numeric)) {
      throw KindMismatch("range " + std::to_string(i) + " does not match the kind of predicate '" +
                         query.predicates[i].attribute + "'");
    }
  }
}

}  // namespace refinery
