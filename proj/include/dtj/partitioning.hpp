#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dtj/model.hpp"

namespace dtj {

/// One uniform temporal partition. The base range is half-open [lo, hi);
/// the final partition is closed at the dataset maximum so every point has
/// exactly one orig_flag=true home. The expanded range is closed on both
/// sides.
struct TemporalPartition {
  int index = 0;
  Interval base;
  Interval expanded;
  bool last = false;
  std::vector<TrajectoryPoint> points;  // time-sorted, orig_flag set per base

  bool base_contains(double t) const {
    return t >= base.t_start && (t < base.t_end || (last && t == base.t_end));
  }
};

/// points must be sorted by time ascending. Throws on n_parts <= 0.
std::vector<TemporalPartition> uniform_temporal_partition(
    std::span<const TrajectoryPoint> points, int n_parts, const JoinParams& params);

/// Equi-depth histogram over the temporal dimension, built from a seeded
/// reservoir sample. boundaries holds M+1 values whose first and last entries
/// are -inf/+inf so every timestamp maps to a bin.
struct EquiDepthHistogram {
  std::vector<double> boundaries;
  std::size_t sample_size = 0;

  int bins() const { return static_cast<int>(boundaries.size()) - 1; }
  std::span<const double> interior() const {
    return std::span<const double>(boundaries).subspan(1, boundaries.size() - 2);
  }
  int bin_of(double t) const;
};

EquiDepthHistogram build_equidepth_histogram(std::span<const TrajectoryPoint> points,
                                             double sample_rate, int M, std::uint64_t seed);

/// Seeded reservoir sample of `target` points from the stream (algorithm R).
std::vector<TrajectoryPoint> reservoir_sample(std::span<const TrajectoryPoint> points,
                                              std::size_t target, std::uint64_t seed);

/// Histogram from an already drawn sample; boundaries sit at the sample's
/// i/M quantiles.
EquiDepthHistogram histogram_from_sample(std::vector<double> sample_times, int M);

/// Number of partition files for a target block size: ceil(total/block).
std::size_t compute_m(std::size_t total_size_bytes, std::size_t block_size_bytes);

/// Collocation group factor: k = ceil(M/nodes); bins i map to group i/k.
std::size_t compute_group_factor(std::size_t m, std::size_t nodes);

/// Routes every point to its histogram bin. Each returned bin is sorted by
/// (t, traj).
std::vector<std::vector<TrajectoryPoint>> repartition(std::span<const TrajectoryPoint> points,
                                                      const EquiDepthHistogram& hist);

/// A temporally contiguous work unit bloated by eps_t on both sides of its
/// base range, which is kept as metadata for duplicate avoidance.
struct Split {
  int index = 0;
  Interval base;  // [lo, hi); closed at hi when last
  bool last = false;
  int group_id = 0;
  std::vector<TrajectoryPoint> points;  // covers [lo - eps_t, hi + eps_t]

  bool base_contains(double t) const {
    return t >= base.t_start && (t < base.t_end || (last && t == base.t_end));
  }
};

/// Base time range of each bin implied by the histogram and the dataset
/// range: [t_min, b_1), [b_1, b_2), ..., [b_{M-1}, t_max].
std::vector<Interval> bin_base_ranges(const EquiDepthHistogram& hist, double t_min,
                                      double t_max);

/// Builds one split per bin, pulling points from as many neighbouring bins as
/// eps_t requires. bins must be time-ordered and time-disjoint.
std::vector<Split> build_splits(const std::vector<std::vector<TrajectoryPoint>>& bins,
                                const std::vector<Interval>& base_ranges,
                                const JoinParams& params, std::size_t group_factor = 1);

/// Issues a warning (returns false) when some trajectory's sampling gap
/// exceeds the partition duration; correctness is unaffected in-process but
/// the candidate-sNJP guarantees assume the opposite.
bool check_partition_duration(std::span<const TrajectoryPoint> points, double partition_duration);

}  // namespace dtj
