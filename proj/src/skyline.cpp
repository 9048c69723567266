#include "refinery/skyline.hpp"

#include <algorithm>

#include "refinery/history.hpp"
#include "refinery/objectives.hpp"
#include "refinery/stats.hpp"

namespace refinery {

InsertOutcome SkylineSet::insert(SkylinePoint point, std::size_t iteration) {
  point.thresholded_deviation = thresholded_deviation(point.deviation, epsilon_);
  const TradeOff p = point.trade_off();
  for (const auto& member : points_) {
    const TradeOff m = member.trade_off();
    if (dominates(m, p) || (m.distance == p.distance && m.deviation == p.deviation)) return InsertOutcome::rejected;
  }
  std::erase_if(points_, [&](const SkylinePoint& member) { return dominates(p, member.trade_off()); });
  auto pos = std::upper_bound(points_.begin(), points_.end(), p.distance,
                              [](double d, const SkylinePoint& m) { return d < m.distance; });
  points_.insert(pos, std::move(point));
  ++generation_;
  last_change_iteration_ = iteration;
  return InsertOutcome::entered;
}

nlohmann::ordered_json SkylineSet::to_json() const {
  auto out = nlohmann::ordered_json::array();
  for (const auto& p : points_) {
    out.push_back({{"assignment_id", p.assignment_id},
                   {"vals", assignment_to_json(p.assignment)},
                   {"dev", stats::round_to(p.deviation, 4)},
                   {"dist", stats::round_to(p.distance, 4)}});
  }
  return out;
}

}  // namespace refinery
