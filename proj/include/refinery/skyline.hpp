#pragma once

#include <cstddef>
#include <vector>

#include <json.hpp>

#include "refinery/query_model.hpp"

namespace refinery {

// Coordinates in the (distance, thresholded deviation) plane.
struct TradeOff {
  double distance = 0;
  double deviation = 0;
};

// a strictly improves one coordinate and is no worse on the other.
inline bool dominates(const TradeOff& a, const TradeOff& b) {
  return (a.distance < b.distance && a.deviation <= b.deviation) ||
         (a.deviation < b.deviation && a.distance <= b.distance);
}

struct SkylinePoint {
  std::size_t assignment_id = 0;
  Assignment assignment;
  double distance = 0;
  double deviation = 0;              // raw
  double thresholded_deviation = 0;  // min(deviation, epsilon)

  TradeOff trade_off() const { return {distance, thresholded_deviation}; }
};

enum class InsertOutcome { entered, rejected };

class SkylineSet {
 public:
  explicit SkylineSet(double epsilon) : epsilon_(epsilon) {}

  // The point's thresholded deviation is recomputed from its raw deviation.
  // Dominated points and exact coordinate duplicates are rejected.
  InsertOutcome insert(SkylinePoint point, std::size_t iteration);

  bool should_stop(std::size_t current_iteration, std::size_t patience) const {
    return current_iteration >= last_change_iteration_ && current_iteration - last_change_iteration_ >= patience;
  }

  // Sorted by distance ascending.
  const std::vector<SkylinePoint>& points() const noexcept { return points_; }
  std::size_t generation() const noexcept { return generation_; }
  std::size_t last_change_iteration() const noexcept { return last_change_iteration_; }
  double epsilon() const noexcept { return epsilon_; }

  // [{"assignment_id": 1, "vals": [...], "dev": .., "dist": ..}, ...]
  nlohmann::ordered_json to_json() const;

 private:
  double epsilon_;
  std::vector<SkylinePoint> points_;
  std::size_t generation_ = 0;
  std::size_t last_change_iteration_ = 0;
};

}  // namespace refinery
