#include "dtj/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace dtj {

double dist_s(const TrajectoryPoint& p, const TrajectoryPoint& q) {
  return std::sqrt(detail::dist_s2(p, q));
}

double dist_t(const TrajectoryPoint& p, const TrajectoryPoint& q) {
  return std::abs(p.t - q.t);
}

Interval common_lifespan(const Trajectory& r, const Trajectory& s) {
  if (r.points.empty() || s.points.empty()) {
    throw std::invalid_argument("common_lifespan requires non-empty trajectories");
  }
  return Interval{std::max(r.points.front().t, s.points.front().t),
                  std::min(r.points.back().t, s.points.back().t)};
}

bool is_joining_pair(const TrajectoryPoint& p, const TrajectoryPoint& q,
                     const JoinParams& params) {
  if (p.traj == q.traj) {
    throw std::invalid_argument("is_joining_pair called with a same-trajectory pair");
  }
  return joins_unchecked(p, q, params);
}

}  // namespace dtj
