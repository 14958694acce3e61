#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dtj {

/// Interned trajectory identifier. Ids are opaque text externally; a Dataset
/// interns them into indices assigned in byte-lexicographic order, so index
/// comparisons agree with lexicographic tie-breaking on the original ids.
using TrajId = std::uint32_t;

inline constexpr std::uint32_t kNoCell = std::numeric_limits<std::uint32_t>::max();

/// One timestamped 2D sample plus partition provenance.
/// orig_flag is true iff the point lies in its task's original (non-expanded)
/// temporal partition; cell_id is assigned only by the indexed join.
struct TrajectoryPoint {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  TrajId traj = 0;
  bool orig_flag = true;
  std::uint32_t cell_id = kNoCell;
};

struct Trajectory {
  TrajId id = 0;
  std::vector<TrajectoryPoint> points;  // strictly increasing t

  std::size_t size() const { return points.size(); }
};

/// Contiguous index range [start_idx, end_idx] of a parent trajectory.
struct Subtrajectory {
  TrajId traj = 0;
  std::uint32_t start_idx = 0;
  std::uint32_t end_idx = 0;

  friend bool operator==(const Subtrajectory&, const Subtrajectory&) = default;
};

/// Closed time interval. duration() may be negative; callers treat a negative
/// duration as "no common lifespan".
struct Interval {
  double t_start = 0.0;
  double t_end = 0.0;

  double duration() const { return t_end - t_start; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

struct JoinParams {
  double eps_sp = 0.0;
  double eps_t = 0.0;
  double delta_t = 0.0;

  /// Sliding-window duration used by the refine phase: max(delta_t - 2*eps_t, 0).
  /// The matching predicate itself uses the raw (possibly negative) threshold.
  double refine_window() const {
    double w = delta_t - 2.0 * eps_t;
    return w > 0.0 ? w : 0.0;
  }
  double lifespan_threshold() const { return delta_t - 2.0 * eps_t; }
};

enum class RecordKind { JoiningPair, BreakingPoint, CandidateSNJP };

/// Join-phase emission unit. flag=true with a partner is a joining pair,
/// flag=true without a partner is a breaking point, flag=false is a candidate
/// sNJP pair.
struct PairRecord {
  TrajectoryPoint ref;
  std::optional<TrajectoryPoint> other;
  bool flag = true;

  RecordKind kind() const {
    if (!flag) return RecordKind::CandidateSNJP;
    return other ? RecordKind::JoiningPair : RecordKind::BreakingPoint;
  }
};

/// One maximal matching subtrajectory pair; the final query answer unit.
struct MatchPair {
  Subtrajectory sub_r;
  Subtrajectory sub_s;
  Interval lifespan;

  friend bool operator==(const MatchPair& a, const MatchPair& b) {
    return a.sub_r == b.sub_r && a.sub_s == b.sub_s;
  }
};

bool match_pair_less(const MatchPair& a, const MatchPair& b);

/// A set of trajectories with interned, lexicographically ordered ids.
class Dataset {
 public:
  Dataset() = default;

  /// Builds a dataset from raw rows. Rows may arrive in any order; points of
  /// each trajectory are sorted by time. Throws std::invalid_argument on a
  /// duplicate (id, t) pair or non-finite values.
  static Dataset from_rows(
      const std::vector<std::tuple<std::string, double, double, double>>& rows);

  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<Trajectory>& trajectories() const { return trajs_; }
  const Trajectory& trajectory(TrajId id) const { return trajs_.at(id); }
  const std::string& id_name(TrajId id) const { return ids_.at(id); }
  std::size_t trajectory_count() const { return trajs_.size(); }
  std::size_t point_count() const;
  bool empty() const { return trajs_.empty(); }

  /// Index of the point of `traj` with timestamp exactly `t`.
  std::uint32_t index_of_time(TrajId traj, double t) const;

  /// All points flattened and sorted by (t, traj) ascending.
  std::vector<TrajectoryPoint> sorted_points() const;

 private:
  std::vector<std::string> ids_;     // lexicographically sorted, unique
  std::vector<Trajectory> trajs_;    // aligned with ids_
};

struct Fixture {
  Dataset data;
  JoinParams params;
};

/// Canonical fixture T1: trajectories r and s run in lockstep 0.5 apart,
/// u is a single far-away point. Expected join result: one maximal pair
/// covering both trajectories entirely.
Fixture make_t1();

/// Canonical fixture T2: like T1 with 7 points, but s's sample at t=3 is
/// displaced to (3,50), splitting the result into two maximal pairs.
Fixture make_t2();

}  // namespace dtj
