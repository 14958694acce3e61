#include "dtj/join.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "dtj/geometry.hpp"

namespace dtj {

bool find_match(const JoinBuffer& buf, TrajId anchor_traj, std::uint32_t k,
                const JoinParams& params) {
  const auto& d = buf.d;
  const TrajectoryPoint& target = d[k];
  const double eps2 = params.eps_sp * params.eps_sp;
  for (std::uint32_t j = k; j-- > 0;) {
    if (target.t - d[j].t > params.eps_t) break;
    if (d[j].traj == anchor_traj && detail::dist_s2(target, d[j]) <= eps2) return true;
  }
  for (std::uint32_t j = k + 1; j < d.size(); ++j) {
    if (d[j].t - target.t > params.eps_t) break;
    if (d[j].traj == anchor_traj && detail::dist_s2(target, d[j]) <= eps2) return true;
  }
  return false;
}

std::optional<std::uint32_t> get_prev_tr_point(const JoinBuffer& buf, std::uint32_t pos) {
  const TrajId traj = buf.d[pos].traj;
  for (std::uint32_t j = pos; j-- > 0;) {
    if (buf.d[j].traj == traj) return j;
  }
  return std::nullopt;
}

namespace detail {

void note_match(JoinBuffer& buf, std::uint32_t ref_pos, std::uint32_t partner_pos) {
  const std::uint64_t key =
      JoinBuffer::pair_key(buf.d[ref_pos].traj, buf.d[partner_pos].traj);
  auto [it, inserted] = buf.last_jp.try_emplace(key, partner_pos, ref_pos);
  if (!inserted) {
    auto& cur = it->second;
    if (partner_pos > cur.first || (partner_pos == cur.first && ref_pos > cur.second)) {
      cur = {partner_pos, ref_pos};
    }
  }
}

void emit_breaking_points(const JoinBuffer& buf, const DupCheck& dup,
                          std::vector<PairRecord>& out, JoinStats* stats) {
  for (std::size_t pos = 0; pos < buf.d.size(); ++pos) {
    if (buf.matched[pos]) continue;
    if (!dup(buf.d[pos])) continue;
    out.push_back(PairRecord{buf.d[pos], std::nullopt, true});
    if (stats) ++stats->bp;
  }
}

}  // namespace detail

void plane_sweep_step(JoinBuffer& buf, std::uint32_t i, const JoinParams& params,
                      const DupCheck& dup, std::vector<PairRecord>& out) {
  auto& d = buf.d;
  const TrajectoryPoint pi = d[i];
  const bool dup_i = dup(pi);
  const double eps2 = params.eps_sp * params.eps_sp;

  for (std::uint32_t j = i; j-- > 0;) {
    if (pi.t - d[j].t > params.eps_t) break;
    if (d[j].traj == pi.traj) continue;
    if (detail::dist_s2(pi, d[j]) > eps2) continue;

    const bool dup_j = dup(d[j]);
    buf.matched[i] = 1;
    buf.matched[j] = 1;
    if (dup_i) out.push_back(PairRecord{pi, d[j], true});
    if (dup_j) out.push_back(PairRecord{d[j], pi, true});
    detail::note_match(buf, i, j);
    detail::note_match(buf, j, i);

    if (dup_i) {
      if (auto k = get_prev_tr_point(buf, j); k && !find_match(buf, pi.traj, *k, params)) {
        out.push_back(PairRecord{pi, d[*k], false});
      }
    }
    if (dup_j) {
      if (auto k = get_prev_tr_point(buf, i); k && !find_match(buf, d[j].traj, *k, params)) {
        out.push_back(PairRecord{d[j], d[*k], false});
      }
    }
  }
}

std::vector<PairRecord> join_partition(std::span<const TrajectoryPoint> points,
                                       const JoinParams& params, const DupCheck& dup,
                                       JoinStats* stats) {
  std::vector<PairRecord> out;
  JoinBuffer buf;
  buf.d.reserve(points.size());
  buf.matched.reserve(points.size());

  double prev_t = -std::numeric_limits<double>::infinity();
  for (const auto& p : points) {
    if (p.t < prev_t) throw std::runtime_error("join_partition: corrupt partition, unsorted input");
    prev_t = p.t;
    const std::uint32_t i = buf.push(p);
    plane_sweep_step(buf, i, params, dup, out);
  }

  if (stats) {
    for (const auto& r : out) {
      if (r.kind() == RecordKind::JoiningPair) ++stats->jp;
      else if (r.kind() == RecordKind::CandidateSNJP) ++stats->snjp_candidates;
    }
  }

  // Successor positions per trajectory for the end-of-partition probe.
  std::vector<std::uint32_t> next_same(buf.d.size(), 0);
  {
    std::unordered_map<TrajId, std::uint32_t> seen;
    for (std::uint32_t pos = static_cast<std::uint32_t>(buf.d.size()); pos-- > 0;) {
      auto it = seen.find(buf.d[pos].traj);
      next_same[pos] = (it == seen.end()) ? pos : it->second;
      seen[buf.d[pos].traj] = pos;
    }
  }
  auto next_fn = [&](std::uint32_t pos) -> std::optional<std::uint32_t> {
    return next_same[pos] == pos ? std::nullopt : std::optional<std::uint32_t>(next_same[pos]);
  };
  auto match_fn = [&](TrajId anchor, std::uint32_t pos) {
    return find_match(buf, anchor, pos, params);
  };
  detail::treat_last_tr_points(buf, params, dup, next_fn, match_fn, out, stats);

  detail::emit_breaking_points(buf, dup, out, stats);
  return out;
}

std::vector<PairRecord> join_partition(const TemporalPartition& part, const JoinParams& params,
                                       JoinStats* stats) {
  return join_partition(std::span<const TrajectoryPoint>(part.points), params, DupCheck::flag(),
                        stats);
}

std::vector<PairRecord> join_partition(const Split& split, const JoinParams& params,
                                       JoinStats* stats) {
  return join_partition(std::span<const TrajectoryPoint>(split.points), params,
                        DupCheck::base_range(split.base, split.last), stats);
}

}  // namespace dtj
