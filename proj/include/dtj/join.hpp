#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "dtj/model.hpp"
#include "dtj/partitioning.hpp"

namespace dtj {

enum class DupMode { Flag, BaseRange };

/// Decides whether records referenced by a point may be emitted by this task.
/// Every emission (joining pair, breaking point, candidate sNJP) is gated on
/// its reference point passing this check, which yields exactly-once output
/// across tasks.
struct DupCheck {
  DupMode mode = DupMode::Flag;
  double base_lo = 0.0;
  double base_hi = 0.0;
  bool hi_inclusive = false;

  bool operator()(const TrajectoryPoint& p) const {
    if (mode == DupMode::Flag) return p.orig_flag;
    return p.t >= base_lo && (p.t < base_hi || (hi_inclusive && p.t == base_hi));
  }

  static DupCheck flag() { return DupCheck{DupMode::Flag, 0, 0, false}; }
  static DupCheck base_range(const Interval& base, bool last) {
    return DupCheck{DupMode::BaseRange, base.t_start, base.t_end, last};
  }
};

/// Time-sorted point buffer for one partition or split, with the bookkeeping
/// the sweep needs: per-position matched status (a point leaves breaking-point
/// candidacy permanently on its first match) and, per ordered trajectory pair
/// (reference, partner), the partner's latest joining position for the
/// end-of-partition fix-up.
struct JoinBuffer {
  std::vector<TrajectoryPoint> d;
  std::vector<std::uint8_t> matched;
  std::unordered_map<std::uint64_t, std::pair<std::uint32_t, std::uint32_t>> last_jp;

  static std::uint64_t pair_key(TrajId ref, TrajId partner) {
    return (static_cast<std::uint64_t>(ref) << 32) | partner;
  }
  std::uint32_t push(const TrajectoryPoint& p) {
    d.push_back(p);
    matched.push_back(0);
    return static_cast<std::uint32_t>(d.size() - 1);
  }
};

struct JoinStats {
  std::size_t jp = 0;
  std::size_t bp = 0;
  std::size_t snjp_candidates = 0;
};

/// Buffer-wide probe: true iff some point of anchor_traj lies within eps_t
/// and eps_sp of d[k]. Linear scan outward from k in both directions.
bool find_match(const JoinBuffer& buf, TrajId anchor_traj, std::uint32_t k,
                const JoinParams& params);

/// Temporally previous point of d[pos]'s trajectory in the buffer, by linear
/// backward scan (the deliberately unindexed variant).
std::optional<std::uint32_t> get_prev_tr_point(const JoinBuffer& buf, std::uint32_t pos);

/// Processes the newest point d[i]: scans the eps_t window before it, emits
/// joining pairs (both orders, each gated on its reference's dup check),
/// probes the partner's previous trajectory point for candidate sNJP records,
/// and tracks breaking-point candidacy.
void plane_sweep_step(JoinBuffer& buf, std::uint32_t i, const JoinParams& params,
                      const DupCheck& dup, std::vector<PairRecord>& out);

/// Full non-indexed join of one sorted partition or split. Throws
/// std::runtime_error on unsorted input.
std::vector<PairRecord> join_partition(std::span<const TrajectoryPoint> points,
                                       const JoinParams& params, const DupCheck& dup,
                                       JoinStats* stats = nullptr);

std::vector<PairRecord> join_partition(const TemporalPartition& part, const JoinParams& params,
                                       JoinStats* stats = nullptr);

std::vector<PairRecord> join_partition(const Split& split, const JoinParams& params,
                                       JoinStats* stats = nullptr);

namespace detail {

/// Shared end-of-partition fix-up: for each ordered (reference, partner)
/// trajectory pair, re-examines the partner's point right after its last
/// joining position (within eps_t) and emits a candidate-sNJP record when the
/// probe finds no match. next_fn supplies the partner successor; match_fn is
/// the kernel's find-match.
template <typename NextFn, typename MatchFn>
void treat_last_tr_points(JoinBuffer& buf, const JoinParams& params, const DupCheck& dup,
                          NextFn&& next_fn, MatchFn&& match_fn, std::vector<PairRecord>& out,
                          JoinStats* stats) {
  std::vector<std::uint64_t> keys;
  keys.reserve(buf.last_jp.size());
  for (const auto& [k, v] : buf.last_jp) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  for (std::uint64_t key : keys) {
    const auto [jstar, istar] = buf.last_jp.at(key);
    const TrajId ref_traj = static_cast<TrajId>(key >> 32);
    auto u = next_fn(jstar);
    if (!u) continue;
    if (buf.d[*u].t - buf.d[jstar].t > params.eps_t) continue;
    if (match_fn(ref_traj, *u)) continue;
    if (dup(buf.d[istar])) {
      out.push_back(PairRecord{buf.d[istar], buf.d[*u], false});
      if (stats) ++stats->snjp_candidates;
    }
  }
}

void emit_breaking_points(const JoinBuffer& buf, const DupCheck& dup,
                          std::vector<PairRecord>& out, JoinStats* stats);

void note_match(JoinBuffer& buf, std::uint32_t ref_pos, std::uint32_t partner_pos);

}  // namespace detail

}  // namespace dtj
