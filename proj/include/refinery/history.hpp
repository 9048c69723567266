#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "refinery/query_model.hpp"
#include "refinery/subspace.hpp"

namespace refinery {

struct EvaluatedAssignment {
  Assignment assignment;
  double distance = 0;
  double deviation = 0;
  std::size_t iteration = 0;
  std::size_t sample_index = 0;  // 1-based, unique per run
};

struct RegisterResult {
  std::size_t id;  // 1-based
  bool created;
};

struct SpreadStats {
  double median = 0;
  double stddev = 0;  // population
};

struct SubspaceSummary {
  std::size_t id = 0;
  Subspace subspace;
  std::size_t history_size = 0;
  std::optional<SpreadStats> deviation;
  std::optional<SpreadStats> distance;
};

// Refinement history keyed by structurally distinct subspaces. Every
// recorded sample is a member of every registered subspace that contains it.
// With back_fill disabled, a subspace only collects samples recorded after
// its registration.
class HistoryStore {
 public:
  explicit HistoryStore(bool back_fill = true) : back_fill_(back_fill) {}

  RegisterResult register_subspace(const Subspace& subspace);
  // Returns the number of subspaces the sample was added to.
  std::size_t record_sample(const EvaluatedAssignment& sample);

  std::vector<SubspaceSummary> summarize() const;

  std::vector<EvaluatedAssignment> local_history(const Subspace& subspace) const;  // UnknownSubspace
  std::vector<EvaluatedAssignment> local_history(std::size_t id) const;            // UnknownSubspace

  std::optional<std::size_t> find(const Subspace& subspace) const;
  const Subspace& subspace(std::size_t id) const;
  std::size_t subspace_count() const noexcept { return entries_.size(); }
  const std::vector<EvaluatedAssignment>& samples() const noexcept { return samples_; }
  // Ids of the subspaces holding the sample at `index` in samples().
  std::vector<std::size_t> memberships(std::size_t index) const;
  bool back_fill() const noexcept { return back_fill_; }

 private:
  struct Entry {
    Subspace subspace;
    std::vector<std::size_t> members;  // indices into samples_
  };
  const Entry& entry(std::size_t id) const;

  bool back_fill_;
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<EvaluatedAssignment> samples_;
};

SpreadStats spread(std::vector<double> values);

// [{"subspace_id": 1, "subspace": {...}, "history_size": 5,
//   "stats": {"deviation": {"med": .., "std": ..}, "distance": {...}}}]
nlohmann::ordered_json summaries_to_json(const std::vector<SubspaceSummary>& summaries, const ParsedQuery& query);

nlohmann::ordered_json literal_to_json(const Literal& literal);
nlohmann::ordered_json assignment_to_json(const Assignment& assignment);

}  // namespace refinery
