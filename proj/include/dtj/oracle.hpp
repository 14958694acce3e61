#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "dtj/model.hpp"

namespace dtj {

struct PointRef {
  TrajId traj = 0;
  std::uint32_t idx = 0;

  friend bool operator==(const PointRef&, const PointRef&) = default;
  friend bool operator<(const PointRef& a, const PointRef& b) {
    return a.traj != b.traj ? a.traj < b.traj : a.idx < b.idx;
  }
};

using PointPair = std::pair<PointRef, PointRef>;

/// Exhaustive classification of all cross-trajectory point pairs.
/// jp and njp hold ordered pairs (reference, other); snjp pairs are oriented
/// the same way, with the non-joining point in second position.
struct PairClassification {
  std::vector<PointPair> jp;
  std::vector<PointRef> bp;
  std::vector<PointPair> njp;
  std::vector<PointPair> snjp;
};

PairClassification classify_point_pairs(const Dataset& data, const JoinParams& params);

/// Test-only ablation hook: points for which the predicate returns true are
/// exempt from the coverage requirement when validating a candidate match,
/// mimicking an algorithm that is unaware of them.
struct OracleOptions {
  std::function<bool(TrajId, std::uint32_t)> skip_coverage;
};

/// Brute-force subtrajectory join: enumerates every pair of subtrajectory
/// index ranges across distinct trajectories, tests the matching predicate
/// verbatim, and keeps exactly the pairs with no strictly containing valid
/// pair. Output is canonical: lexicographically smaller trajectory id first,
/// sorted, no duplicates.
///
/// Deliberately exhaustive; trajectories longer than kOracleMaxPoints are
/// rejected to keep the O(n^2 m^2) state affordable.
std::vector<MatchPair> oracle_join(const Dataset& data, const JoinParams& params,
                                   const OracleOptions& opts = {});

inline constexpr std::size_t kOracleMaxPoints = 64;

}  // namespace dtj
