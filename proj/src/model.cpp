#include "dtj/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

namespace dtj {

bool match_pair_less(const MatchPair& a, const MatchPair& b) {
  auto key = [](const MatchPair& m) {
    return std::make_tuple(m.sub_r.traj, m.sub_r.start_idx, m.sub_r.end_idx,
                           m.sub_s.traj, m.sub_s.start_idx, m.sub_s.end_idx);
  };
  return key(a) < key(b);
}

Dataset Dataset::from_rows(
    const std::vector<std::tuple<std::string, double, double, double>>& rows) {
  std::map<std::string, std::vector<TrajectoryPoint>> grouped;
  for (const auto& [id, t, x, y] : rows) {
    if (!std::isfinite(t) || !std::isfinite(x) || !std::isfinite(y)) {
      throw std::invalid_argument("non-finite coordinate in trajectory '" + id + "'");
    }
    grouped[id].push_back(TrajectoryPoint{t, x, y, 0, true, kNoCell});
  }

  Dataset ds;
  ds.ids_.reserve(grouped.size());
  ds.trajs_.reserve(grouped.size());
  TrajId next = 0;
  for (auto& [id, pts] : grouped) {  // std::map iterates ids in lex order
    std::sort(pts.begin(), pts.end(),
              [](const TrajectoryPoint& a, const TrajectoryPoint& b) { return a.t < b.t; });
    for (std::size_t i = 1; i < pts.size(); ++i) {
      if (pts[i].t == pts[i - 1].t) {
        throw std::invalid_argument("duplicate timestamp in trajectory '" + id + "'");
      }
    }
    for (auto& p : pts) p.traj = next;
    ds.ids_.push_back(id);
    ds.trajs_.push_back(Trajectory{next, std::move(pts)});
    ++next;
  }
  return ds;
}

std::size_t Dataset::point_count() const {
  std::size_t n = 0;
  for (const auto& tr : trajs_) n += tr.points.size();
  return n;
}

std::uint32_t Dataset::index_of_time(TrajId traj, double t) const {
  const auto& pts = trajs_.at(traj).points;
  auto it = std::lower_bound(pts.begin(), pts.end(), t,
                             [](const TrajectoryPoint& p, double v) { return p.t < v; });
  if (it == pts.end() || it->t != t) {
    throw std::out_of_range("no point at requested time in trajectory '" + ids_.at(traj) + "'");
  }
  return static_cast<std::uint32_t>(it - pts.begin());
}

std::vector<TrajectoryPoint> Dataset::sorted_points() const {
  std::vector<TrajectoryPoint> all;
  all.reserve(point_count());
  for (const auto& tr : trajs_) {
    all.insert(all.end(), tr.points.begin(), tr.points.end());
  }
  std::sort(all.begin(), all.end(), [](const TrajectoryPoint& a, const TrajectoryPoint& b) {
    if (a.t != b.t) return a.t < b.t;
    return a.traj < b.traj;
  });
  return all;
}

Fixture make_t1() {
  std::vector<std::tuple<std::string, double, double, double>> rows;
  for (int i = 0; i <= 4; ++i) {
    rows.emplace_back("r", static_cast<double>(i), static_cast<double>(i), 0.0);
    rows.emplace_back("s", static_cast<double>(i), static_cast<double>(i), 0.5);
  }
  rows.emplace_back("u", 2.0, 100.0, 100.0);
  return Fixture{Dataset::from_rows(rows), JoinParams{1.0, 0.5, 3.0}};
}

Fixture make_t2() {
  std::vector<std::tuple<std::string, double, double, double>> rows;
  for (int i = 0; i <= 6; ++i) {
    rows.emplace_back("r", static_cast<double>(i), static_cast<double>(i), 0.0);
    double y = (i == 3) ? 50.0 : 0.5;
    double x = static_cast<double>(i);
    rows.emplace_back("s", static_cast<double>(i), x, y);
  }
  return Fixture{Dataset::from_rows(rows), JoinParams{1.0, 0.5, 3.0}};
}

}  // namespace dtj
