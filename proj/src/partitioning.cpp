#include "dtj/partitioning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <unordered_map>

namespace dtj {

namespace {

// Per-trajectory views over a time-sorted stream, for adjacency pulls.
std::unordered_map<TrajId, std::vector<const TrajectoryPoint*>> traj_views(
    std::span<const TrajectoryPoint> points) {
  std::unordered_map<TrajId, std::vector<const TrajectoryPoint*>> views;
  for (const auto& p : points) views[p.traj].push_back(&p);
  return views;
}

// The candidate-sNJP probes look up each trajectory's point right before and
// right after a work unit's time range. Sampling gaps can exceed both eps_t
// and the unit's bloat, so every unit also carries those adjacent points;
// they sit outside the base range and never pass the duplicate check, and
// being more than eps_t from every base point they cannot add joining pairs.
void pull_adjacent(const std::unordered_map<TrajId, std::vector<const TrajectoryPoint*>>& views,
                   double lo, double hi, std::vector<TrajectoryPoint>& unit_points) {
  std::vector<TrajectoryPoint> left, right;
  for (const auto& [traj, pts] : views) {
    auto at_lo = std::lower_bound(pts.begin(), pts.end(), lo,
                                  [](const TrajectoryPoint* p, double v) { return p->t < v; });
    if (at_lo != pts.begin()) {
      TrajectoryPoint q = **(at_lo - 1);
      q.orig_flag = false;
      left.push_back(q);
    }
    auto past_hi = std::upper_bound(pts.begin(), pts.end(), hi,
                                    [](double v, const TrajectoryPoint* p) { return v < p->t; });
    if (past_hi != pts.end()) {
      TrajectoryPoint q = **past_hi;
      q.orig_flag = false;
      right.push_back(q);
    }
  }
  auto by_time = [](const TrajectoryPoint& a, const TrajectoryPoint& b) {
    if (a.t != b.t) return a.t < b.t;
    return a.traj < b.traj;
  };
  std::sort(left.begin(), left.end(), by_time);
  std::sort(right.begin(), right.end(), by_time);
  unit_points.insert(unit_points.begin(), left.begin(), left.end());
  unit_points.insert(unit_points.end(), right.begin(), right.end());
}

}  // namespace

std::vector<TemporalPartition> uniform_temporal_partition(
    std::span<const TrajectoryPoint> points, int n_parts, const JoinParams& params) {
  if (n_parts <= 0) throw std::invalid_argument("uniform_temporal_partition: n_parts must be >= 1");

  std::vector<TemporalPartition> parts(n_parts);
  if (points.empty()) {
    for (int i = 0; i < n_parts; ++i) {
      parts[i].index = i;
      parts[i].last = (i == n_parts - 1);
    }
    return parts;
  }

  const double t_min = points.front().t;
  const double t_max = points.back().t;
  const double width = (t_max - t_min) / n_parts;

  std::vector<double> bounds(n_parts + 1);
  for (int i = 0; i <= n_parts; ++i) bounds[i] = t_min + width * i;
  bounds[0] = t_min;
  bounds[n_parts] = t_max;

  for (int i = 0; i < n_parts; ++i) {
    parts[i].index = i;
    parts[i].last = (i == n_parts - 1);
    parts[i].base = Interval{bounds[i], bounds[i + 1]};
    parts[i].expanded = Interval{bounds[i] - params.eps_t, bounds[i + 1] + params.eps_t};
  }

  for (const auto& p : points) {
    // Candidate partition range; interval tests settle the borders exactly.
    int lo = 0, hi = n_parts - 1;
    if (width > 0) {
      lo = static_cast<int>(std::floor((p.t - params.eps_t - t_min) / width)) - 1;
      hi = static_cast<int>(std::floor((p.t + params.eps_t - t_min) / width)) + 1;
      lo = std::max(lo, 0);
      hi = std::min(hi, n_parts - 1);
    }
    for (int i = lo; i <= hi; ++i) {
      if (p.t < parts[i].expanded.t_start || p.t > parts[i].expanded.t_end) continue;
      TrajectoryPoint q = p;
      q.orig_flag = parts[i].base_contains(p.t);
      parts[i].points.push_back(q);
    }
  }

  const auto views = traj_views(points);
  for (auto& part : parts) {
    pull_adjacent(views, part.expanded.t_start, part.expanded.t_end, part.points);
  }
  return parts;
}

int EquiDepthHistogram::bin_of(double t) const {
  const auto in = interior();
  return static_cast<int>(std::upper_bound(in.begin(), in.end(), t) - in.begin());
}

std::vector<TrajectoryPoint> reservoir_sample(std::span<const TrajectoryPoint> points,
                                              std::size_t target, std::uint64_t seed) {
  const std::size_t n = points.size();
  if (target >= n) return std::vector<TrajectoryPoint>(points.begin(), points.end());
  std::vector<TrajectoryPoint> sample;
  sample.reserve(target);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    if (i < target) {
      sample.push_back(points[i]);
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, i);
      const std::size_t k = pick(rng);
      if (k < target) sample[k] = points[i];
    }
  }
  return sample;
}

EquiDepthHistogram histogram_from_sample(std::vector<double> sample_times, int M) {
  if (sample_times.empty()) throw std::invalid_argument("histogram_from_sample: empty sample");
  if (M < 1) throw std::invalid_argument("histogram_from_sample: M must be >= 1");
  std::sort(sample_times.begin(), sample_times.end());

  EquiDepthHistogram hist;
  hist.sample_size = sample_times.size();
  hist.boundaries.resize(M + 1);
  hist.boundaries.front() = -std::numeric_limits<double>::infinity();
  hist.boundaries.back() = std::numeric_limits<double>::infinity();
  for (int i = 1; i < M; ++i) {
    const std::size_t pos = static_cast<std::size_t>(i) * sample_times.size() / M;
    hist.boundaries[i] = sample_times[std::min(pos, sample_times.size() - 1)];
  }
  return hist;
}

EquiDepthHistogram build_equidepth_histogram(std::span<const TrajectoryPoint> points,
                                             double sample_rate, int M, std::uint64_t seed) {
  if (points.empty()) throw std::invalid_argument("build_equidepth_histogram: empty input");
  if (M < 1) throw std::invalid_argument("build_equidepth_histogram: M must be >= 1");
  if (!(sample_rate > 0.0) || sample_rate > 1.0) {
    throw std::invalid_argument("build_equidepth_histogram: sample_rate must be in (0, 1]");
  }
  std::size_t target =
      static_cast<std::size_t>(std::ceil(sample_rate * static_cast<double>(points.size())));
  target = std::max<std::size_t>(target, 1);
  const auto sample = reservoir_sample(points, target, seed);
  std::vector<double> times;
  times.reserve(sample.size());
  for (const auto& p : sample) times.push_back(p.t);
  return histogram_from_sample(std::move(times), M);
}

std::size_t compute_m(std::size_t total_size_bytes, std::size_t block_size_bytes) {
  if (total_size_bytes == 0 || block_size_bytes == 0) {
    throw std::invalid_argument("compute_m: sizes must be positive");
  }
  return (total_size_bytes + block_size_bytes - 1) / block_size_bytes;
}

std::size_t compute_group_factor(std::size_t m, std::size_t nodes) {
  if (m == 0 || nodes == 0) throw std::invalid_argument("compute_group_factor: arguments must be positive");
  return (m + nodes - 1) / nodes;
}

std::vector<std::vector<TrajectoryPoint>> repartition(std::span<const TrajectoryPoint> points,
                                                      const EquiDepthHistogram& hist) {
  std::vector<std::vector<TrajectoryPoint>> bins(hist.bins());
  for (const auto& p : points) bins[hist.bin_of(p.t)].push_back(p);
  for (auto& bin : bins) {
    std::sort(bin.begin(), bin.end(), [](const TrajectoryPoint& a, const TrajectoryPoint& b) {
      if (a.t != b.t) return a.t < b.t;
      return a.traj < b.traj;
    });
  }
  return bins;
}

std::vector<Interval> bin_base_ranges(const EquiDepthHistogram& hist, double t_min,
                                      double t_max) {
  const int m = hist.bins();
  std::vector<Interval> out(m);
  for (int i = 0; i < m; ++i) {
    out[i].t_start = (i == 0) ? t_min : hist.boundaries[i];
    out[i].t_end = (i == m - 1) ? t_max : hist.boundaries[i + 1];
  }
  return out;
}

std::vector<Split> build_splits(const std::vector<std::vector<TrajectoryPoint>>& bins,
                                const std::vector<Interval>& base_ranges,
                                const JoinParams& params, std::size_t group_factor) {
  if (bins.size() != base_ranges.size()) {
    throw std::invalid_argument("build_splits: bins and base ranges disagree");
  }
  if (group_factor == 0) group_factor = 1;
  const int m = static_cast<int>(bins.size());
  std::vector<Split> splits(m);

  auto lower = [](const std::vector<TrajectoryPoint>& v, double t) {
    return std::lower_bound(v.begin(), v.end(), t,
                            [](const TrajectoryPoint& p, double x) { return p.t < x; });
  };
  auto upper = [](const std::vector<TrajectoryPoint>& v, double t) {
    return std::upper_bound(v.begin(), v.end(), t,
                            [](double x, const TrajectoryPoint& p) { return x < p.t; });
  };

  std::unordered_map<TrajId, std::vector<const TrajectoryPoint*>> views;
  for (const auto& bin : bins) {
    for (const auto& p : bin) views[p.traj].push_back(&p);
  }

  for (int i = 0; i < m; ++i) {
    Split& sp = splits[i];
    sp.index = i;
    sp.base = base_ranges[i];
    sp.last = (i == m - 1);
    sp.group_id = static_cast<int>(i / group_factor);

    const double lo = sp.base.t_start - params.eps_t;
    const double hi = sp.base.t_end + params.eps_t;

    // Neighbouring files may be narrower than eps_t, so the bloat range can
    // span several of them on either side.
    int jlo = i;
    while (jlo > 0 && base_ranges[jlo - 1].t_end > lo) --jlo;
    int jhi = i;
    while (jhi < m - 1 && base_ranges[jhi + 1].t_start <= hi) ++jhi;

    for (int j = jlo; j <= jhi; ++j) {
      auto from = (j < i) ? lower(bins[j], lo) : bins[j].begin();
      auto to = (j > i) ? upper(bins[j], hi) : bins[j].end();
      sp.points.insert(sp.points.end(), from, to);
    }
    pull_adjacent(views, lo, hi, sp.points);
  }
  return splits;
}

bool check_partition_duration(std::span<const TrajectoryPoint> points,
                              double partition_duration) {
  std::unordered_map<TrajId, double> last_t;
  double max_gap = 0.0;
  for (const auto& p : points) {
    auto it = last_t.find(p.traj);
    if (it != last_t.end()) max_gap = std::max(max_gap, p.t - it->second);
    last_t[p.traj] = p.t;
  }
  return partition_duration > max_gap;
}

}  // namespace dtj
