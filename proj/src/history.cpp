#include "refinery/history.hpp"

#include <algorithm>

#include "refinery/errors.hpp"
#include "refinery/stats.hpp"

namespace refinery {

RegisterResult HistoryStore::register_subspace(const Subspace& subspace) {
  auto key = canonical_key(subspace);
  if (auto it = index_.find(key); it != index_.end()) return {it->second, false};
  Entry e{subspace, {}};
  if (back_fill_) {
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      if (contains(subspace, samples_[i].assignment)) e.members.push_back(i);
    }
  }
  entries_.push_back(std::move(e));
  index_.emplace(std::move(key), entries_.size());
  return {entries_.size(), true};
}

std::size_t HistoryStore::record_sample(const EvaluatedAssignment& sample) {
  samples_.push_back(sample);
  std::size_t updated = 0;
  for (auto& e : entries_) {
    if (contains(e.subspace, sample.assignment)) {
      e.members.push_back(samples_.size() - 1);
      ++updated;
    }
  }
  return updated;
}

SpreadStats spread(std::vector<double> values) {
  return {stats::median(values), stats::population_stddev(values)};
}

std::vector<SubspaceSummary> HistoryStore::summarize() const {
  std::vector<SubspaceSummary> out;
  out.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    SubspaceSummary s;
    s.id = i + 1;
    s.subspace = e.subspace;
    s.history_size = e.members.size();
    if (!e.members.empty()) {
      std::vector<double> dev, dist;
      for (auto m : e.members) {
        dev.push_back(samples_[m].deviation);
        dist.push_back(samples_[m].distance);
      }
      s.deviation = spread(std::move(dev));
      s.distance = spread(std::move(dist));
    }
    out.push_back(std::move(s));
  }
  return out;
}

const HistoryStore::Entry& HistoryStore::entry(std::size_t id) const {
  if (id == 0 || id > entries_.size()) throw UnknownSubspace("no subspace with id " + std::to_string(id));
  return entries_[id - 1];
}

std::vector<EvaluatedAssignment> HistoryStore::local_history(std::size_t id) const {
  std::vector<EvaluatedAssignment> out;
  for (auto m : entry(id).members) out.push_back(samples_[m]);
  return out;
}

std::vector<EvaluatedAssignment> HistoryStore::local_history(const Subspace& subspace) const {
  auto id = find(subspace);
  if (!id) throw UnknownSubspace("subspace " + canonical_key(subspace) + " is not registered");
  return local_history(*id);
}

std::optional<std::size_t> HistoryStore::find(const Subspace& subspace) const {
  auto it = index_.find(canonical_key(subspace));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const Subspace& HistoryStore::subspace(std::size_t id) const { return entry(id).subspace; }

std::vector<std::size_t> HistoryStore::memberships(std::size_t index) const {
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& m = entries_[i].members;
    if (std::find(m.begin(), m.end(), index) != m.end()) ids.push_back(i + 1);
  }
  return ids;
}

nlohmann::ordered_json literal_to_json(const Literal& literal) {
  if (const auto* d = std::get_if<double>(&literal)) return *d;
  return nlohmann::ordered_json(std::get<CategoricalSet>(literal));
}

nlohmann::ordered_json assignment_to_json(const Assignment& assignment) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& v : assignment.values) out.push_back(literal_to_json(v));
  return out;
}

nlohmann::ordered_json summaries_to_json(const std::vector<SubspaceSummary>& summaries, const ParsedQuery& query) {
  using oj = nlohmann::ordered_json;
  auto stat = [](const std::optional<SpreadStats>& s) -> oj {
    if (!s) return nullptr;
    return {{"med", stats::round_to(s->median, 4)}, {"std", stats::round_to(s->stddev, 4)}};
  };
  oj out = oj::array();
  for (const auto& s : summaries) {
    oj e;
    e["subspace_id"] = s.id;
    e["subspace"] = to_json(s.subspace, query);
    e["history_size"] = s.history_size;
    e["stats"] = {{"deviation", stat(s.deviation)}, {"distance", stat(s.distance)}};
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace refinery
