#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "refinery/catalog.hpp"
#include "refinery/history.hpp"
#include "refinery/objectives.hpp"
#include "refinery/proposal.hpp"
#include "refinery/query_model.hpp"
#include "refinery/skyline.hpp"
#include "refinery/subspace.hpp"

namespace refinery {

struct EngineConfig {
  std::size_t iterations = 5;  // T
  std::size_t samples = 5;     // K
  std::size_t patience = 2;    // u
  std::uint64_t seed = 0;
  StrategyConfig subspace_strategy;
  StrategyConfig assignment_strategy;
  // false: a subspace only collects samples drawn after its registration.
  bool back_fill = true;
  std::optional<double> budget_seconds;
  // Model calls allowed per run; proposals that could overrun it use uniform draws.
  std::optional<std::size_t> wire_call_budget;
  DomainOptions domain;

  // {"iterations": 5, "samples": 5, "patience": 2, "seed": 0,
  //  "strategy": {...} | "subspace_strategy": {...}, "assignment_strategy": {...},
  //  "history": "back_fill" | "forward_only", "budget_seconds": 60, "wire_call_budget": 25,
  //  "derived_bounds": "unfiltered" | "filtered" | "hull", "static_bounds": {"3": [lo, hi]}}
  // T, K and u are accepted as aliases. static_bounds keys are 1-based predicate numbers.
  static EngineConfig from_json(const nlohmann::json& doc);  // SpecError
  nlohmann::ordered_json to_json() const;
};

struct RefinementInstance {
  DatasetManifest dataset;
  std::string query;
  ConstraintSpec constraints;
  double epsilon = 0.1;
  DistanceSpec distance;
  EngineConfig engine;

  void validate() const;  // InstanceError
};

struct Evaluation {
  double distance = 0;
  double deviation = 0;
  bool cache_hit = false;
  // Deviation could not be computed (e.g. a division by zero); scored as 1.
  bool failed = false;
  std::string error;
};

struct SampleRecord {
  std::size_t index = 0;  // 1-based
  std::size_t iteration = 0;
  std::size_t subspace_id = 0;  // 0 for baseline sampling
  Assignment assignment;
  double distance = 0;
  double deviation = 0;
  bool satisfying = false;
  bool cache_hit = false;
  bool failed = false;

  nlohmann::ordered_json to_json() const;
};

enum class RunStatus { satisfied, unsatisfied };

std::string to_string(RunStatus status);

struct RunReport {
  RunStatus status = RunStatus::unsatisfied;
  std::optional<SampleRecord> best;
  std::string refined_sql;
  std::size_t sat_size = 0;
  std::size_t iterations = 0;
  bool early_stopped = false;
  bool budget_exhausted = false;
  std::vector<SkylinePoint> skyline;
  std::size_t subspaces = 0;
  std::size_t executions = 0;  // queries actually run (cache misses)
  std::size_t engine_fallbacks = 0;  // strategy failures absorbed by the engine
  ProposalStats subspace_stats;
  ProposalStats assignment_stats;
  double wall_seconds = 0;
  std::uint64_t seed = 0;
  std::vector<SampleRecord> samples;

  // Timing fields are left out when include_timing is false.
  nlohmann::ordered_json to_json(bool include_timing = true) const;
  // One JSON object per line, in sample order.
  std::string sample_log() const;
  TokenUsage tokens() const;
};

// State after every sample ("sample") and at the end of every iteration ("iteration").
struct TraceEvent {
  std::string phase;
  std::size_t iteration = 0;
  std::size_t subspace_id = 0;
  const SampleRecord* sample = nullptr;
  const HistoryStore* history = nullptr;
  const std::vector<std::size_t>* sat = nullptr;  // sample indices
  const SkylineSet* skyline = nullptr;
};

using TraceHook = std::function<void(const TraceEvent&)>;

// One refinement problem bound to a loaded catalog. run() and
// run_baseline_sampling() start from a fresh history, skyline and cache.
// Separate engines may run concurrently; one engine runs one thing at a time.
class RefinementEngine {
 public:
  // Loads the dataset. Throws InstanceError on load, parse or probe failures.
  explicit RefinementEngine(RefinementInstance instance, TransportFactory transport = {});
  RefinementEngine(RefinementInstance instance, std::shared_ptr<const Catalog> catalog, TransportFactory transport = {});

  const RefinementInstance& instance() const noexcept { return instance_; }
  const ParsedQuery& query() const noexcept { return query_; }
  const SubspaceDomain& domain() const noexcept { return domain_; }
  const Catalog& catalog() const noexcept { return *catalog_; }
  const InstanceBrief& brief() const noexcept { return brief_; }

  // Runs the refined query once per distinct assignment. ExecError propagates.
  Evaluation evaluate(const Assignment& assignment);
  void clear_cache();

  RunReport run();
  // n uniform draws from the whole domain. On a finite domain the draws are
  // distinct, so n at least the domain size covers it exactly.
  RunReport run_baseline_sampling(std::size_t n = 100);

  void set_trace(TraceHook hook) { trace_ = std::move(hook); }

 private:
  void prepare();
  const ResultSet& baseline_result();
  void finish(RunReport& report, const std::vector<std::size_t>& sat) const;

  RefinementInstance instance_;
  std::shared_ptr<const Catalog> catalog_;
  TransportFactory transport_;
  ParsedQuery query_;
  SubspaceDomain domain_;
  InstanceBrief brief_;
  std::optional<ResultSet> baseline_result_;
  std::unordered_map<std::string, Evaluation> cache_;
  std::size_t misses_ = 0;
  TraceHook trace_;
};

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t role);

}  // namespace refinery
