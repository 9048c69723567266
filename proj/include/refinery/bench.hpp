#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "refinery/engine.hpp"

namespace refinery {

inline constexpr int kInstanceFormatVersion = 1;

struct InstanceMeta {
  std::string instance_class;  // topk, range, diversity, complex or empty
  // Reference optimum for optimality scoring; 0 when absent.
  std::optional<double> delta_opt;
  std::string note;
};

// A refinement problem on disk:
//
//   {"format_version": 1,
//    "name": "...",                        optional, else the file stem
//    "dataset": "data/x.json" | {"tables": [...]},
//    "query": "SELECT ...",
//    "constraints": {"terms": [...]},
//    "epsilon": 0.1,
//    "distance": {"kind": "predicate_based"},
//    "engine": {...EngineConfig...},
//    "meta": {"class": "topk", "delta_opt": 0.25, "note": "..."}}
//
// Relative paths resolve against the file's directory.
struct InstanceFile {
  std::string name;
  RefinementInstance instance;
  InstanceMeta meta;
  // The dataset entry as written, so serialization keeps a path a path.
  nlohmann::json dataset_source;
  std::filesystem::path base_dir;

  static InstanceFile parse(const nlohmann::json& doc, const std::filesystem::path& base_dir,
                            std::string fallback_name = "instance");  // InstanceError
  static InstanceFile load(const std::filesystem::path& path);          // InstanceError
  nlohmann::ordered_json to_json() const;
};

// Instance files directly inside `dir` (JSON documents with a
// format_version), sorted by path.
std::vector<std::filesystem::path> discover_instances(const std::filesystem::path& dir);

struct RepeatResult {
  std::size_t repeat = 0;
  std::uint64_t seed = 0;
  bool satisfied = false;
  std::optional<double> distance;
  std::optional<double> bounded_distance;  // every predicate term capped at 1
  std::optional<double> deviation;
  std::optional<double> optimality;        // satisfied runs only
  std::string refined_sql;
  std::size_t iterations = 0;
  std::size_t samples = 0;
  std::size_t executions = 0;
  TokenUsage tokens;
  double wall_seconds = 0;
  std::string error;
};

struct InstanceResult {
  std::string name;
  std::string path;
  std::string instance_class;
  double delta_opt = 0;
  double delta_max = 0;
  std::vector<RepeatResult> repeats;
  double success_rate = 0;
  std::optional<double> best_optimality;
  std::string error;  // load failure; repeats is then empty
};

struct ClassAggregate {
  std::string instance_class;
  std::size_t instances = 0;
  double success_rate = 0;                 // mean over instances
  std::optional<double> best_optimality;   // mean over instances that have one
};

struct SuiteOptions {
  std::size_t repeats = 5;
  // Replaces every instance's seed; repeat i runs with seed + i.
  std::optional<std::uint64_t> seed;
  // Replaces both strategy roles of every instance.
  std::optional<StrategyConfig> strategy;
  std::optional<double> budget_seconds;
  std::size_t workers = 1;
  TransportFactory transport;
  // When set, each run's sample log is written there as <name>.<repeat>.jsonl.
  std::optional<std::filesystem::path> log_dir;
};

struct SuiteReport {
  std::vector<InstanceResult> instances;
  std::vector<ClassAggregate> classes;
  std::size_t runs = 0;
  std::size_t satisfied_runs = 0;
  TokenUsage tokens;
  double wall_seconds = 0;

  nlohmann::ordered_json to_json(bool include_timing = true) const;
  // One row per instance and repeat.
  std::string to_csv(bool include_timing = true) const;
};

// Optimality of one satisfied run from its bounded distance.
std::optional<double> run_optimality(double bounded_distance, double delta_opt, double delta_max);

SuiteReport run_suite(const std::vector<std::filesystem::path>& paths, const SuiteOptions& options = {});

// Success rate and best optimality of one instance, from its repeats alone.
void score_instance(InstanceResult& result);

}  // namespace refinery
