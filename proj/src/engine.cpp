#include "refinery/engine.hpp"

#include <algorithm>
#include <chrono>
#include <random>
#include <set>

#include "refinery/errors.hpp"

namespace refinery {

namespace {

using oj = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

std::size_t positive(const nlohmann::json& doc, std::initializer_list<const char*> keys, std::size_t fallback) {
  for (const char* k : keys) {
    if (auto it = doc.find(k); it != doc.end()) {
      if (!it->is_number_integer() || it->get<long long>() < 1) throw SpecError(std::string(k) + " must be a positive integer");
      return it->get<std::size_t>();
    }
  }
  return fallback;
}

std::string mode_name(DerivedBoundsMode m) {
  switch (m) {
    case DerivedBoundsMode::unfiltered: return "unfiltered";
    case DerivedBoundsMode::filtered: return "filtered";
    case DerivedBoundsMode::hull: return "hull";
  }
  return "?";
}

oj skyline_json(const std::vector<SkylinePoint>& points) {
  oj out = oj::array();
  for (const auto& p : points) {
    out.push_back({{"assignment_id", p.assignment_id},
                   {"vals", assignment_to_json(p.assignment)},
                   {"dev", p.deviation},
                   {"dist", p.distance}});
  }
  return out;
}

oj tokens_json(const TokenUsage& t) {
  return {{"prompt", t.prompt_tokens}, {"completion", t.completion_tokens}, {"total", t.total_tokens}};
}

// Min-Δ satisfying sample, else min-ψ sample; the earliest wins ties.
std::optional<SampleRecord> select_best(const std::vector<SampleRecord>& samples) {
  const SampleRecord* best = nullptr;
  for (const auto& s : samples) {
    if (!s.satisfying) continue;
    if (!best || s.distance < best->distance) best = &s;
  }
  if (!best) {
    for (const auto& s : samples) {
      if (!best || s.deviation < best->deviation) best = &s;
    }
  }
  if (!best) return std::nullopt;
  return *best;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t role) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (role + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// ---------------------------------------------------------------- config

EngineConfig EngineConfig::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw SpecError("engine config must be an object");
  EngineConfig c;
  c.iterations = positive(doc, {"iterations", "T"}, c.iterations);
  c.samples = positive(doc, {"samples", "K"}, c.samples);
  c.patience = positive(doc, {"patience", "u"}, c.patience);
  try {
    if (doc.contains("seed")) c.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("strategy")) c.subspace_strategy = c.assignment_strategy = StrategyConfig::from_json(doc["strategy"]);
    if (doc.contains("subspace_strategy")) c.subspace_strategy = StrategyConfig::from_json(doc["subspace_strategy"]);
    if (doc.contains("assignment_strategy")) c.assignment_strategy = StrategyConfig::from_json(doc["assignment_strategy"]);
    const std::string history = doc.value("history", std::string("back_fill"));
    if (history != "back_fill" && history != "forward_only") throw SpecError("history must be back_fill or forward_only");
    c.back_fill = history == "back_fill";
    if (doc.contains("budget_seconds")) {
      c.budget_seconds = doc["budget_seconds"].get<double>();
      if (!(*c.budget_seconds > 0)) throw SpecError("budget_seconds must be positive");
    }
    if (doc.contains("wire_call_budget")) c.wire_call_budget = doc["wire_call_budget"].get<std::size_t>();
    const std::string mode = doc.value("derived_bounds", std::string("unfiltered"));
    if (mode == "unfiltered") {
      c.domain.mode = DerivedBoundsMode::unfiltered;
    } else if (mode == "filtered") {
      c.domain.mode = DerivedBoundsMode::filtered;
    } else if (mode == "hull") {
      c.domain.mode = DerivedBoundsMode::hull;
    } else {
      throw SpecError("derived_bounds must be unfiltered, filtered or hull");
    }
    if (doc.contains("static_bounds")) {
      for (const auto& [key, value] : doc["static_bounds"].items()) {
        const std::size_t number = std::stoul(key);
        if (number == 0 || !value.is_array() || value.size() != 2) {
          throw SpecError("static_bounds entries are \"<predicate number>\": [lo, hi]");
        }
        c.domain.static_bounds[number - 1] = {value[0].get<double>(), value[1].get<double>()};
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("bad engine config: ") + e.what());
  } catch (const std::logic_error& e) {
    throw SpecError(std::string("bad engine config: ") + e.what());
  }
  return c;
}

nlohmann::ordered_json EngineConfig::to_json() const {
  oj out{{"iterations", iterations},
         {"samples", samples},
         {"patience", patience},
         {"seed", seed},
         {"subspace_strategy", subspace_strategy.to_json()},
         {"assignment_strategy", assignment_strategy.to_json()},
         {"history", back_fill ? "back_fill" : "forward_only"}};
  if (budget_seconds) out["budget_seconds"] = *budget_seconds;
  if (wire_call_budget) out["wire_call_budget"] = *wire_call_budget;
  out["derived_bounds"] = mode_name(domain.mode);
  if (!domain.static_bounds.empty()) {
    oj sb = oj::object();
    for (const auto& [id, b] : domain.static_bounds) sb[std::to_string(id + 1)] = {b.first, b.second};
    out["static_bounds"] = std::move(sb);
  }
  return out;
}

void RefinementInstance::validate() const {
  if (dataset.tables.empty()) throw InstanceError("the dataset lists no tables");
  if (query.empty()) throw InstanceError("the query is empty");
  if (constraints.terms.empty()) throw InstanceError("no constraint terms");
  if (!(epsilon >= 0 && epsilon < 1)) throw InstanceError("epsilon must lie in [0, 1)");
  if (engine.iterations < 1 || engine.samples < 1 || engine.patience < 1) {
    throw InstanceError("iterations, samples and patience must be positive");
  }
}

// ---------------------------------------------------------------- reports

std::string to_string(RunStatus status) { return status == RunStatus::satisfied ? "satisfied" : "unsatisfied"; }

nlohmann::ordered_json SampleRecord::to_json() const {
  oj out{{"index", index},
         {"iteration", iteration},
         {"subspace_id", subspace_id},
         {"theta", assignment_to_json(assignment)},
         {"dist", distance},
         {"dev", deviation},
         {"satisfying", satisfying},
         {"cache_hit", cache_hit}};
  if (failed) out["failed"] = true;
  return out;
}

TokenUsage RunReport::tokens() const {
  TokenUsage t = subspace_stats.tokens;
  t += assignment_stats.tokens;
  return t;
}

nlohmann::ordered_json RunReport::to_json(bool include_timing) const {
  oj out{{"status", to_string(status)},
         {"seed", seed},
         {"best", best ? best->to_json() : oj(nullptr)},
         {"refined_sql", refined_sql},
         {"sat_size", sat_size},
         {"iterations", iterations},
         {"early_stopped", early_stopped},
         {"budget_exhausted", budget_exhausted},
         {"samples", samples.size()},
         {"subspaces", subspaces},
         {"executions", executions},
         {"engine_fallbacks", engine_fallbacks},
         {"skyline", skyline_json(skyline)},
         {"proposals", {{"subspace", subspace_stats.to_json()}, {"assignment", assignment_stats.to_json()}}},
         {"tokens", tokens_json(tokens())}};
  if (include_timing) out["wall_seconds"] = wall_seconds;
  return out;
}

std::string RunReport::sample_log() const {
  std::string out;
  for (const auto& s : samples) out += s.to_json().dump() + "\n";
  return out;
}

// ---------------------------------------------------------------- engine

RefinementEngine::RefinementEngine(RefinementInstance instance, TransportFactory transport)
    : instance_(std::move(instance)), transport_(std::move(transport)) {
  instance_.validate();
  try {
    catalog_ = std::make_shared<const Catalog>(Catalog::load(instance_.dataset));
  } catch (const InstanceError&) {
    throw;
  } catch (const Error& e) {
    throw InstanceError(std::string("cannot load the dataset: ") + e.what());
  }
  prepare();
}

RefinementEngine::RefinementEngine(RefinementInstance instance, std::shared_ptr<const Catalog> catalog,
                                   TransportFactory transport)
    : instance_(std::move(instance)), catalog_(std::move(catalog)), transport_(std::move(transport)) {
  instance_.validate();
  if (!catalog_) throw InstanceError("no catalog given");
  prepare();
}

void RefinementEngine::prepare() {
  try {
    query_ = parse_query(instance_.query);
  } catch (const Error& e) {
    throw InstanceError(std::string("cannot use the query: ") + e.what());
  }
  DatabaseDescription description;
  try {
    description = catalog_->describe_for_query(query_);
  } catch (const Error& e) {
    throw InstanceError(std::string("cannot describe the query's tables: ") + e.what());
  }

  DomainOptions options = instance_.engine.domain;
  std::unique_ptr<ProposalStrategy> prober;
  const std::string database = description.render();
  if (!options.fallback_bounds && instance_.engine.subspace_strategy.kind == StrategyKind::llm) {
    options.fallback_bounds = [&](const RefinablePredicate& p) -> std::optional<std::pair<double, double>> {
      if (!prober) prober = make_strategy(instance_.engine.subspace_strategy, instance_.engine.seed, transport_);
      return prober->propose_bounds(database, query_, p);
    };
  }
  try {
    domain_ = derive_domain(*catalog_, query_, options);
  } catch (const Error& e) {
    throw InstanceError(std::string("cannot derive the subspace domain: ") + e.what());
  }
  brief_ = InstanceBrief::build(description, query_, instance_.constraints, instance_.distance, instance_.epsilon,
                                domain_);
}

const ResultSet& RefinementEngine::baseline_result() {
  if (!baseline_result_) {
    baseline_result_ = catalog_->execute(query_.original_sql);
    ++misses_;
  }
  return *baseline_result_;
}

void RefinementEngine::clear_cache() {
  cache_.clear();
  misses_ = 0;
}

Evaluation RefinementEngine::evaluate(const Assignment& assignment) {
  const std::string key = canonical_key(assignment);
  if (auto it = cache_.find(key); it != cache_.end()) {
    Evaluation e = it->second;
    e.cache_hit = true;
    return e;
  }
  const std::string sql = apply_assignment(query_, assignment);
  const ResultSet result = catalog_->execute(sql);
  ++misses_;
  Evaluation e;
  try {
    e.deviation = eval_deviation(instance_.constraints, result);
  } catch (const EvalError& err) {
    e.deviation = 1;
    e.failed = true;
    e.error = err.what();
  } catch (const UnknownColumn& err) {
    throw InstanceError(std::string("the constraints do not fit the query output: ") + err.what());
  }
  const bool outcome = instance_.distance.kind == DistanceKind::outcome_jaccard;
  e.distance = eval_distance(instance_.distance, query_, assignment, outcome ? &baseline_result() : nullptr,
                             outcome ? &result : nullptr);
  cache_.emplace(key, e);
  return e;
}

void RefinementEngine::finish(RunReport& report, const std::vector<std::size_t>& sat) const {
  report.sat_size = sat.size();
  report.best = select_best(report.samples);
  report.status = sat.empty() ? RunStatus::unsatisfied : RunStatus::satisfied;
  if (report.best) report.refined_sql = apply_assignment(query_, report.best->assignment);
  report.executions = misses_;
  report.seed = instance_.engine.seed;
}

RunReport RefinementEngine::run() {
  const auto started = Clock::now();
  const EngineConfig& cfg = instance_.engine;
  clear_cache();

  auto ms = make_strategy(cfg.subspace_strategy, derive_seed(cfg.seed, 1), transport_);
  auto ma = make_strategy(cfg.assignment_strategy, derive_seed(cfg.seed, 2), transport_);
  UniformRandomStrategy rescue(derive_seed(cfg.seed, 3));

  HistoryStore history(cfg.back_fill);
  SkylineSet skyline(instance_.epsilon);
  std::vector<std::size_t> sat;
  RunReport report;

  auto out_of_time = [&] {
    return cfg.budget_seconds &&
           std::chrono::duration<double>(Clock::now() - started).count() >= *cfg.budget_seconds;
  };
  auto may_call = [&](const ProposalStrategy& s) {
    const std::size_t per = s.wire_calls_per_proposal();
    if (!cfg.wire_call_budget || per == 0) return true;
    return ms->stats().wire_calls + ma->stats().wire_calls + per <= *cfg.wire_call_budget;
  };
  auto emit = [&](const char* phase, std::size_t t, std::size_t id, const SampleRecord* s) {
    if (trace_) trace_(TraceEvent{phase, t, id, s, &history, &sat, &skyline});
  };

  ProposalContext base;
  base.query = &query_;
  base.domain = &domain_;
  base.brief = &brief_;
  base.skyline = &skyline;
  base.rounds = cfg.iterations;
  base.samples = cfg.samples;

  bool stop = false;
  for (std::size_t t = 1; t <= cfg.iterations && !stop; ++t) {
    if (out_of_time()) {
      report.budget_exhausted = true;
      break;
    }
    ProposalContext ctx = base;
    ctx.iteration = t;
    ctx.summaries = history.summarize();

    Subspace theta;
    bool proposed = false;
    if (may_call(*ms)) {
      try {
        theta = clamp_to_domain(domain_, ms->propose_subspace(ctx));
        proposed = true;
      } catch (const InstanceError&) {
        throw;
      } catch (const Error&) {
      }
    }
    if (!proposed) {
      ++report.engine_fallbacks;
      theta = rescue.draw_subspace(domain_);
    }
    const std::size_t id = history.register_subspace(theta).id;

    for (std::size_t k = 1; k <= cfg.samples; ++k) {
      if (out_of_time()) {
        report.budget_exhausted = true;
        stop = true;
        break;
      }
      ProposalContext actx = base;
      actx.iteration = t;
      actx.sample = k;
      actx.local_history = history.local_history(id);

      Assignment a;
      bool ok = false;
      if (may_call(*ma)) {
        try {
          a = ma->propose_assignment(actx, theta);
          if (!contains(theta, a)) a = clamp_into(theta, a);
          ok = true;
        } catch (const InstanceError&) {
          throw;
        } catch (const Error&) {
        }
      }
      if (!ok) {
        ++report.engine_fallbacks;
        a = rescue.propose_assignment(actx, theta);
      }

      const Evaluation ev = evaluate(a);
      SampleRecord rec;
      rec.index = report.samples.size() + 1;
      rec.iteration = t;
      rec.subspace_id = id;
      rec.assignment = a;
      rec.distance = ev.distance;
      rec.deviation = ev.deviation;
      rec.satisfying = is_satisfying(ev.deviation, instance_.epsilon);
      rec.cache_hit = ev.cache_hit;
      rec.failed = ev.failed;

      history.record_sample(EvaluatedAssignment{a, ev.distance, ev.deviation, t, rec.index});
      if (rec.satisfying) sat.push_back(rec.index);
      skyline.insert(SkylinePoint{rec.index, a, ev.distance, ev.deviation, 0}, t);
      report.samples.push_back(std::move(rec));
      emit("sample", t, id, &report.samples.back());
    }
    report.iterations = t;
    emit("iteration", t, id, nullptr);
    if (!stop && t < cfg.iterations && skyline.should_stop(t, cfg.patience)) {
      report.early_stopped = true;
      stop = true;
    }
  }

  report.skyline = skyline.points();
  report.subspaces = history.subspace_count();
  report.subspace_stats = ms->stats();
  report.assignment_stats = ma->stats();
  finish(report, sat);
  report.wall_seconds = std::chrono::duration<double>(Clock::now() - started).count();
  return report;
}

RunReport RefinementEngine::run_baseline_sampling(std::size_t n) {
  const auto started = Clock::now();
  const EngineConfig& cfg = instance_.engine;
  clear_cache();
  std::mt19937_64 rng(derive_seed(cfg.seed, 4));
  const Subspace full = domain_.as_subspace();

  std::vector<Assignment> draws;
  if (auto all = enumerate_assignments(full, n)) {
    // The whole finite domain fits in n draws.
    draws = std::move(*all);
    std::shuffle(draws.begin(), draws.end(), rng);
  } else {
    std::set<std::string> seen;
    while (draws.size() < n) {
      Assignment a = sample_within(full, rng);
      for (int retry = 0; retry < 64 && seen.count(canonical_key(a)); ++retry) a = sample_within(full, rng);
      seen.insert(canonical_key(a));
      draws.push_back(std::move(a));
    }
  }

  SkylineSet skyline(instance_.epsilon);
  std::vector<std::size_t> sat;
  RunReport report;
  for (auto& a : draws) {
    if (cfg.budget_seconds && std::chrono::duration<double>(Clock::now() - started).count() >= *cfg.budget_seconds) {
      report.budget_exhausted = true;
      break;
    }
    const Evaluation ev = evaluate(a);
    SampleRecord rec;
    rec.index = report.samples.size() + 1;
    rec.iteration = 1;
    rec.assignment = std::move(a);
    rec.distance = ev.distance;
    rec.deviation = ev.deviation;
    rec.satisfying = is_satisfying(ev.deviation, instance_.epsilon);
    rec.cache_hit = ev.cache_hit;
    rec.failed = ev.failed;
    if (rec.satisfying) sat.push_back(rec.index);
    skyline.insert(SkylinePoint{rec.index, rec.assignment, ev.distance, ev.deviation, 0}, 1);
    report.samples.push_back(std::move(rec));
  }
  report.iterations = 1;
  report.skyline = skyline.points();
  finish(report, sat);
  report.wall_seconds = std::chrono::duration<double>(Clock::now() - started).count();
  return report;
}

}  // namespace refinery
