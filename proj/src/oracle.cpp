#include "dtj/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dtj/geometry.hpp"

namespace dtj {

namespace {

// Sorted partner indices in `other` for each point of `own`.
std::vector<std::vector<int>> partner_lists(const Trajectory& own, const Trajectory& other,
                                            const JoinParams& params) {
  std::vector<std::vector<int>> out(own.points.size());
  for (std::size_t i = 0; i < own.points.size(); ++i) {
    for (std::size_t j = 0; j < other.points.size(); ++j) {
      if (joins_unchecked(own.points[i], other.points[j], params)) {
        out[i].push_back(static_cast<int>(j));
      }
    }
  }
  return out;
}

struct PairJoinState {
  int n = 0, m = 0;
  std::vector<std::uint8_t> valid;  // [i1][j1][i2][j2], n*n*m*m bytes

  std::size_t at(int i1, int j1, int i2, int j2) const {
    return ((static_cast<std::size_t>(i1) * n + j1) * m + i2) * m + j2;
  }
};

// Marks every index-range pair satisfying the matching predicate:
// both-side coverage plus the common-lifespan condition (raw threshold,
// which may be negative and then holds trivially).
void compute_valid(const Trajectory& A, const Trajectory& B, const JoinParams& params,
                   const std::vector<std::vector<int>>& pa,
                   const std::vector<char>& exempt_a, const std::vector<char>& exempt_b,
                   PairJoinState& st) {
  const int n = st.n, m = st.m;
  const double W = params.lifespan_threshold();
  std::vector<double> ta(n), tb(m);
  for (int i = 0; i < n; ++i) ta[i] = A.points[i].t;
  for (int j = 0; j < m; ++j) tb[j] = B.points[j].t;

  std::vector<int> f(m);         // minimal j2 satisfying all a-side constraints; m = impossible
  std::vector<int> cnt(m);       // partners of b-point within [i1..j1]
  std::vector<int> next_bad(m + 1);

  for (int i1 = 0; i1 < n; ++i1) {
    std::fill(f.begin(), f.end(), -1);
    std::fill(cnt.begin(), cnt.end(), 0);
    for (int j1 = i1; j1 < n; ++j1) {
      const auto& P = pa[j1];
      if (!exempt_a[j1]) {
        // Fold in point j1's stabbing constraint: f[i2] = max over a-points of
        // (smallest partner >= i2).
        int cur = m;
        int pi = static_cast<int>(P.size()) - 1;
        for (int i2 = m - 1; i2 >= 0; --i2) {
          while (pi >= 0 && P[pi] >= i2) {
            cur = P[pi];
            --pi;
          }
          if (cur > f[i2]) f[i2] = cur;
        }
      }
      for (int j : P) ++cnt[j];

      next_bad[m] = m;
      for (int j2 = m - 1; j2 >= 0; --j2) {
        const bool covered = cnt[j2] > 0 || exempt_b[j2];
        next_bad[j2] = covered ? next_bad[j2 + 1] : j2;
      }

      for (int i2 = 0; i2 < m; ++i2) {
        if (f[i2] >= m) continue;  // some a-point has no partner at or after i2
        int lo = std::max(i2, f[i2]);
        int hi = next_bad[i2] - 1;
        if (hi >= m) hi = m - 1;
        // Lifespan: min(ta[j1], tb[j2]) - max(ta[i1], tb[i2]) >= W.
        const double need = W + std::max(ta[i1], tb[i2]);
        if (ta[j1] < need) continue;
        if (lo < 0) lo = i2;
        while (lo <= hi && tb[lo] < need) ++lo;
        if (lo > hi) continue;
        std::uint8_t* row = st.valid.data() + st.at(i1, j1, i2, 0);
        std::fill(row + lo, row + hi + 1, std::uint8_t{1});
      }
    }
  }
}

// Dominance closure over the superset cone {i1' <= i1, j1' >= j1, i2' <= i2,
// j2' >= j2}; a pair is maximal exactly when no valid pair dominates it.
std::vector<std::uint8_t> dominance_or(const PairJoinState& st) {
  const int n = st.n, m = st.m;
  std::vector<std::uint8_t> g = st.valid;
  const std::size_t block_i1 = static_cast<std::size_t>(n) * m * m;
  for (int i1 = 1; i1 < n; ++i1) {
    std::uint8_t* dst = g.data() + i1 * block_i1;
    const std::uint8_t* src = g.data() + (i1 - 1) * block_i1;
    for (std::size_t k = 0; k < block_i1; ++k) dst[k] |= src[k];
  }
  const std::size_t block_j1 = static_cast<std::size_t>(m) * m;
  for (int i1 = 0; i1 < n; ++i1) {
    for (int j1 = n - 2; j1 >= 0; --j1) {
      std::uint8_t* dst = g.data() + i1 * block_i1 + j1 * block_j1;
      const std::uint8_t* src = dst + block_j1;
      for (std::size_t k = 0; k < block_j1; ++k) dst[k] |= src[k];
    }
  }
  for (std::size_t base = 0; base < g.size(); base += block_j1) {
    for (int i2 = 1; i2 < m; ++i2) {
      std::uint8_t* dst = g.data() + base + static_cast<std::size_t>(i2) * m;
      const std::uint8_t* src = dst - m;
      for (int k = 0; k < m; ++k) dst[k] |= src[k];
    }
    for (std::size_t row = base; row < base + block_j1; row += m) {
      std::uint8_t* r = g.data() + row;
      for (int j2 = m - 2; j2 >= 0; --j2) r[j2] |= r[j2 + 1];
    }
  }
  return g;
}

void join_trajectory_pair(const Trajectory& A, const Trajectory& B, const JoinParams& params,
                          const OracleOptions& opts, std::vector<MatchPair>& out) {
  const int n = static_cast<int>(A.points.size());
  const int m = static_cast<int>(B.points.size());
  if (static_cast<std::size_t>(n) > kOracleMaxPoints ||
      static_cast<std::size_t>(m) > kOracleMaxPoints) {
    throw std::invalid_argument("oracle_join: trajectory exceeds the documented point cap");
  }

  auto pa = partner_lists(A, B, params);
  bool any = false;
  for (const auto& lst : pa) any = any || !lst.empty();
  if (!any && !opts.skip_coverage) return;

  std::vector<char> exempt_a(n, 0), exempt_b(m, 0);
  if (opts.skip_coverage) {
    for (int i = 0; i < n; ++i) exempt_a[i] = opts.skip_coverage(A.id, i) ? 1 : 0;
    for (int j = 0; j < m; ++j) exempt_b[j] = opts.skip_coverage(B.id, j) ? 1 : 0;
  }

  PairJoinState st;
  st.n = n;
  st.m = m;
  st.valid.assign(static_cast<std::size_t>(n) * n * m * m, 0);
  compute_valid(A, B, params, pa, exempt_a, exempt_b, st);

  const auto g = dominance_or(st);
  auto cone = [&](int i1, int j1, int i2, int j2) -> std::uint8_t {
    if (i1 < 0 || j1 >= st.n || i2 < 0 || j2 >= st.m) return 0;
    return g[st.at(i1, j1, i2, j2)];
  };

  for (int i1 = 0; i1 < n; ++i1) {
    for (int j1 = i1; j1 < n; ++j1) {
      for (int i2 = 0; i2 < m; ++i2) {
        for (int j2 = i2; j2 < m; ++j2) {
          if (!st.valid[st.at(i1, j1, i2, j2)]) continue;
          const bool has_superset = cone(i1 - 1, j1, i2, j2) || cone(i1, j1 + 1, i2, j2) ||
                                    cone(i1, j1, i2 - 1, j2) || cone(i1, j1, i2, j2 + 1);
          if (has_superset) continue;
          MatchPair mp;
          mp.sub_r = Subtrajectory{A.id, static_cast<std::uint32_t>(i1),
                                   static_cast<std::uint32_t>(j1)};
          mp.sub_s = Subtrajectory{B.id, static_cast<std::uint32_t>(i2),
                                   static_cast<std::uint32_t>(j2)};
          mp.lifespan = Interval{std::max(A.points[i1].t, B.points[i2].t),
                                 std::min(A.points[j1].t, B.points[j2].t)};
          out.push_back(mp);
        }
      }
    }
  }
}

}  // namespace

PairClassification classify_point_pairs(const Dataset& data, const JoinParams& params) {
  if (data.empty()) {
    throw std::invalid_argument("classify_point_pairs requires at least one trajectory");
  }
  PairClassification out;
  const auto& trajs = data.trajectories();

  // Joining pairs and per-point matched status.
  std::vector<std::vector<char>> matched(trajs.size());
  for (const auto& tr : trajs) matched[tr.id].assign(tr.points.size(), 0);

  for (const auto& A : trajs) {
    for (const auto& B : trajs) {
      if (A.id == B.id) continue;
      for (std::size_t i = 0; i < A.points.size(); ++i) {
        for (std::size_t j = 0; j < B.points.size(); ++j) {
          if (joins_unchecked(A.points[i], B.points[j], params)) {
            out.jp.push_back({PointRef{A.id, static_cast<std::uint32_t>(i)},
                              PointRef{B.id, static_cast<std::uint32_t>(j)}});
            matched[A.id][i] = 1;
          }
        }
      }
    }
  }
  for (const auto& tr : trajs) {
    for (std::size_t i = 0; i < tr.points.size(); ++i) {
      if (!matched[tr.id][i]) out.bp.push_back(PointRef{tr.id, static_cast<std::uint32_t>(i)});
    }
  }

  // Non-joining pairs: neither point is breaking and the pair fails the
  // predicate. sNJP additionally needs an adjacent joining point (with a
  // different reference) and the reference to be the unique nearest in time.
  for (const auto& R : trajs) {
    for (const auto& S : trajs) {
      if (R.id == S.id) continue;
      auto s_partners = partner_lists(S, R, params);  // per s-point: r indices
      for (std::size_t i = 0; i < R.points.size(); ++i) {
        if (!matched[R.id][i]) continue;
        for (std::size_t j = 0; j < S.points.size(); ++j) {
          if (!matched[S.id][j]) continue;
          if (joins_unchecked(R.points[i], S.points[j], params)) continue;
          out.njp.push_back({PointRef{R.id, static_cast<std::uint32_t>(i)},
                             PointRef{S.id, static_cast<std::uint32_t>(j)}});

          auto adjacent_joins_other = [&](std::size_t adj) {
            if (adj >= S.points.size()) return false;
            for (int p : s_partners[adj]) {
              if (static_cast<std::size_t>(p) != i) return true;
            }
            return false;
          };
          bool adjacent = (j > 0 && adjacent_joins_other(j - 1)) || adjacent_joins_other(j + 1);
          if (!adjacent) continue;

          const double di = std::abs(R.points[i].t - S.points[j].t);
          bool nearest = true;
          for (std::size_t q = 0; q < R.points.size() && nearest; ++q) {
            if (q == i) continue;
            if (std::abs(R.points[q].t - S.points[j].t) <= di) nearest = false;
          }
          if (nearest) {
            out.snjp.push_back({PointRef{R.id, static_cast<std::uint32_t>(i)},
                                PointRef{S.id, static_cast<std::uint32_t>(j)}});
          }
        }
      }
    }
  }
  return out;
}

std::vector<MatchPair> oracle_join(const Dataset& data, const JoinParams& params,
                                   const OracleOptions& opts) {
  std::vector<MatchPair> out;
  const auto& trajs = data.trajectories();
  for (std::size_t a = 0; a < trajs.size(); ++a) {
    for (std::size_t b = a + 1; b < trajs.size(); ++b) {
      join_trajectory_pair(trajs[a], trajs[b], params, opts, out);
    }
  }
  std::sort(out.begin(), out.end(), match_pair_less);
  return out;
}

}  // namespace dtj
