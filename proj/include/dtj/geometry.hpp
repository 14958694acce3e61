#pragma once

#include "dtj/model.hpp"

namespace dtj {

/// Euclidean distance between two samples, ignoring time.
double dist_s(const TrajectoryPoint& p, const TrajectoryPoint& q);

namespace detail {
/// Squared spatial distance for hot loops comparing against a squared
/// threshold; the outcome is identical to comparing dist_s.
inline double dist_s2(const TrajectoryPoint& p, const TrajectoryPoint& q) {
  const double dx = p.x - q.x;
  const double dy = p.y - q.y;
  return dx * dx + dy * dy;
}
}  // namespace detail

/// Temporal distance |p.t - q.t|.
double dist_t(const TrajectoryPoint& p, const TrajectoryPoint& q);

/// Common lifespan [max(first times), min(last times)]. A negative duration
/// signals disjoint lifespans.
Interval common_lifespan(const Trajectory& r, const Trajectory& s);

/// Point-level matching predicate: both thresholds inclusive. Throws
/// std::invalid_argument for a same-trajectory pair.
bool is_joining_pair(const TrajectoryPoint& p, const TrajectoryPoint& q,
                     const JoinParams& params);

/// Predicate without the cross-trajectory contract check, for internal loops
/// that already guarantee it.
inline bool joins_unchecked(const TrajectoryPoint& p, const TrajectoryPoint& q,
                            const JoinParams& params) {
  double dt = p.t - q.t;
  if (dt < 0) dt = -dt;
  if (dt > params.eps_t) return false;
  const double dx = p.x - q.x, dy = p.y - q.y;
  return dx * dx + dy * dy <= params.eps_sp * params.eps_sp;
}

}  // namespace dtj
