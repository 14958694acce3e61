#include "dtj/refine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <tuple>

namespace dtj {

namespace {

// Joining structure between the reference trajectory and one partner,
// restricted to what the record stream reveals: partner points that join some
// reference point (with their adjacency) plus verified candidate-sNJP points
// (no join with the reference anywhere), which carry empty adjacency and
// therefore block any range containing them.
struct PartnerData {
  std::vector<double> xt;                            // known partner times, ascending
  std::vector<std::vector<std::int32_t>> xadj;       // per known point: entry indices
  std::vector<std::vector<std::int32_t>> padj;       // per entry: known-point indices
  std::vector<std::int32_t> empty_prefix;            // prefix count of empty-adjacency points

  bool has_empty_inside(std::int32_t lo, std::int32_t hi) const {
    if (hi - lo < 2) return false;
    return empty_prefix[hi] - empty_prefix[lo + 1] > 0;
  }
};

struct Candidate {
  std::int32_t pl, pr, xl, xr;

  bool contains(const Candidate& o) const {
    return pl <= o.pl && pr >= o.pr && xl <= o.xl && xr >= o.xr;
  }
  friend bool operator==(const Candidate&, const Candidate&) = default;
};

struct RefineState {
  TrajId ref = 0;
  std::vector<double> p_times;                       // entry times, strictly increasing
  std::vector<std::vector<TrajId>> entry_partners;   // sorted unique partner ids per entry
  std::map<TrajId, PartnerData> partners;
};

bool adj_hits_range(const std::vector<std::int32_t>& adj, std::int32_t lo, std::int32_t hi) {
  auto it = std::lower_bound(adj.begin(), adj.end(), lo);
  return it != adj.end() && *it <= hi;
}

// Sorts the stream into the two refine structures: one MatchList entry per
// reference point (breaking points as empty entries) and the FalseList of
// candidate pairs. Enforces the shuffle contract on the way.
std::pair<MatchList, FalseList> build_lists(std::span<const PairRecord> records,
                                            const RefineOptions& opts) {
  MatchList ml;
  FalseList fl;
  if (records.empty()) return {ml, fl};
  const TrajId ref = records.front().ref.traj;

  double prev_t = -std::numeric_limits<double>::infinity();
  for (const auto& r : records) {
    if (r.ref.traj != ref) {
      throw std::runtime_error("refine_trajectory: mixed reference trajectories in stream");
    }
    if (r.ref.t < prev_t) {
      throw std::runtime_error("refine_trajectory: unsorted record stream");
    }
    const RecordKind kind = r.kind();
    if (opts.ignore_bp && kind == RecordKind::BreakingPoint) continue;
    if (opts.ignore_false && kind == RecordKind::CandidateSNJP) continue;

    if (ml.empty() || r.ref.t > prev_t) {
      ml.push_back(MatchListEntry{r.ref.t, {}});
      prev_t = r.ref.t;
    }
    const auto entry = static_cast<std::int32_t>(ml.size() - 1);
    switch (kind) {
      case RecordKind::JoiningPair:
        ml.back().partners.emplace_back(r.other->traj, r.other->t);
        break;
      case RecordKind::CandidateSNJP:
        fl.push_back(FalseListEntry{entry, r.other->traj, r.other->t});
        break;
      case RecordKind::BreakingPoint:
        break;
    }
  }
  for (auto& e : ml) std::sort(e.partners.begin(), e.partners.end());
  return {ml, fl};
}

RefineState parse_records(std::span<const PairRecord> records, const RefineOptions& opts) {
  RefineState st;
  if (records.empty()) return st;
  st.ref = records.front().ref.traj;

  const auto [ml, fl] = build_lists(records, opts);

  std::map<TrajId, std::vector<std::pair<double, std::int32_t>>> joins;  // (xt, entry)
  std::map<TrajId, std::vector<double>> flagged;
  st.p_times.reserve(ml.size());
  st.entry_partners.resize(ml.size());
  for (std::int32_t e = 0; e < static_cast<std::int32_t>(ml.size()); ++e) {
    st.p_times.push_back(ml[e].t);
    for (const auto& [x, xt] : ml[e].partners) {
      joins[x].emplace_back(xt, e);
      if (st.entry_partners[e].empty() || st.entry_partners[e].back() != x) {
        st.entry_partners[e].push_back(x);
      }
    }
  }
  for (const auto& f : fl) flagged[f.partner].push_back(f.partner_t);

  const std::int32_t n = static_cast<std::int32_t>(st.p_times.size());
  for (auto& [x, js] : joins) {
    PartnerData pd;
    std::sort(js.begin(), js.end());
    for (const auto& [xt, e] : js) {
      if (pd.xt.empty() || pd.xt.back() != xt) {
        pd.xt.push_back(xt);
        pd.xadj.emplace_back();
      }
      pd.xadj.back().push_back(e);
    }
    // Verified FalseList points: candidates that never join the reference.
    auto fit = flagged.find(x);
    if (fit != flagged.end()) {
      std::sort(fit->second.begin(), fit->second.end());
      fit->second.erase(std::unique(fit->second.begin(), fit->second.end()), fit->second.end());
      std::vector<double> xt2;
      std::vector<std::vector<std::int32_t>> xadj2;
      std::size_t a = 0, b = 0;
      while (a < pd.xt.size() || b < fit->second.size()) {
        if (b >= fit->second.size() || (a < pd.xt.size() && pd.xt[a] <= fit->second[b])) {
          if (b < fit->second.size() && pd.xt[a] == fit->second[b]) ++b;  // spurious candidate
          xt2.push_back(pd.xt[a]);
          xadj2.push_back(std::move(pd.xadj[a]));
          ++a;
        } else {
          xt2.push_back(fit->second[b]);
          xadj2.emplace_back();
          ++b;
        }
      }
      pd.xt = std::move(xt2);
      pd.xadj = std::move(xadj2);
    }

    pd.empty_prefix.assign(pd.xt.size() + 1, 0);
    for (std::size_t k = 0; k < pd.xt.size(); ++k) {
      pd.empty_prefix[k + 1] = pd.empty_prefix[k] + (pd.xadj[k].empty() ? 1 : 0);
    }
    pd.padj.assign(n, {});
    for (std::size_t k = 0; k < pd.xt.size(); ++k) {
      for (std::int32_t e : pd.xadj[k]) pd.padj[e].push_back(static_cast<std::int32_t>(k));
    }
    for (auto& lst : pd.padj) std::sort(lst.begin(), lst.end());
    st.partners.emplace(x, std::move(pd));
  }

  // Partners that only ever appear in candidate records contribute nothing:
  // no joining pair with the reference means no match is possible.
  return st;
}

ResultT intersect_window(const RefineState& st, std::int32_t f, std::int32_t wend) {
  ResultT rt;
  rt.window_t0 = st.p_times[f];
  rt.window_t1 = st.p_times[wend];

  std::vector<TrajId> surv = st.entry_partners[f];
  for (std::int32_t e = f + 1; e <= wend && !surv.empty(); ++e) {
    std::vector<TrajId> next;
    std::set_intersection(surv.begin(), surv.end(), st.entry_partners[e].begin(),
                          st.entry_partners[e].end(), std::back_inserter(next));
    surv = std::move(next);
  }

  for (TrajId x : surv) {
    const PartnerData& pd = st.partners.at(x);
    std::int32_t lo = std::numeric_limits<std::int32_t>::max();
    std::int32_t hi = -1;
    for (std::int32_t e = f; e <= wend; ++e) {
      const auto& lst = pd.padj[e];
      lo = std::min(lo, lst.front());
      hi = std::max(hi, lst.back());
    }
    ResultT::Survivor s;
    s.partner = x;
    s.span_t0 = pd.xt[lo];
    s.span_t1 = pd.xt[hi];
    s.excluded = pd.has_empty_inside(lo, hi);
    rt.survivors.push_back(s);
  }
  return rt;
}

// Grows a valid seed pair to the unique maximal valid pair containing it.
// Works from optimistic caps inward: trims uncovered points off the four
// ends (never cutting into the seed), then excludes any still-uncovered
// interior point via a cap and retries.
Candidate grow_maximal(const RefineState& st, const PartnerData& pd, Candidate seed) {
  const std::int32_t n = static_cast<std::int32_t>(st.p_times.size());
  const std::int32_t m = static_cast<std::int32_t>(pd.xt.size());
  std::int32_t cap_pl = 0, cap_pr = n - 1, cap_xl = 0, cap_xr = m - 1;

  auto p_covered = [&](std::int32_t e, std::int32_t xl, std::int32_t xr) {
    return adj_hits_range(pd.padj[e], xl, xr);
  };
  auto x_covered = [&](std::int32_t k, std::int32_t pl, std::int32_t pr) {
    return adj_hits_range(pd.xadj[k], pl, pr);
  };

  for (;;) {
    std::int32_t pl = cap_pl, pr = cap_pr, xl = cap_xl, xr = cap_xr;
    bool changed = true;
    while (changed) {
      changed = false;
      while (pl < seed.pl && !p_covered(pl, xl, xr)) { ++pl; changed = true; }
      while (pr > seed.pr && !p_covered(pr, xl, xr)) { --pr; changed = true; }
      while (xl < seed.xl && !x_covered(xl, pl, pr)) { ++xl; changed = true; }
      while (xr > seed.xr && !x_covered(xr, pl, pr)) { --xr; changed = true; }
    }

    // Interior points of the newly grown segments must be covered too;
    // an uncovered one can never belong to a valid extension, so it caps
    // the search on its side.
    bool capped = false;
    for (std::int32_t e = pl; e < seed.pl && !capped; ++e) {
      if (!p_covered(e, xl, xr)) { cap_pl = e + 1; capped = true; }
    }
    for (std::int32_t e = pr; e > seed.pr && !capped; --e) {
      if (!p_covered(e, xl, xr)) { cap_pr = e - 1; capped = true; }
    }
    for (std::int32_t k = xl; k < seed.xl && !capped; ++k) {
      if (!x_covered(k, pl, pr)) { cap_xl = k + 1; capped = true; }
    }
    for (std::int32_t k = xr; k > seed.xr && !capped; --k) {
      if (!x_covered(k, pl, pr)) { cap_xr = k - 1; capped = true; }
    }
    if (!capped) return Candidate{pl, pr, xl, xr};
  }
}

bool candidate_valid(const PartnerData& pd, const Candidate& c) {
  for (std::int32_t e = c.pl; e <= c.pr; ++e) {
    if (!adj_hits_range(pd.padj[e], c.xl, c.xr)) return false;
  }
  for (std::int32_t k = c.xl; k <= c.xr; ++k) {
    if (!adj_hits_range(pd.xadj[k], c.pl, c.pr)) return false;
  }
  return true;
}

}  // namespace

std::vector<WindowFragment> window_sweep(const ResultT& result_t, const JoinParams&) {
  std::vector<WindowFragment> out;
  for (const auto& s : result_t.survivors) {
    if (s.excluded) continue;
    out.push_back(WindowFragment{s.partner, result_t.window_t0, result_t.window_t1, s.span_t0,
                                 s.span_t1});
  }
  return out;
}

RefineOutput refine_trajectory(std::span<const PairRecord> records, const JoinParams& params,
                               const RefineOptions& opts) {
  RefineOutput out;
  RefineState st = parse_records(records, opts);
  const std::int32_t n = static_cast<std::int32_t>(st.p_times.size());
  if (n == 0) return out;

  // Window machinery: each entry becomes the window front exactly once,
  // either when the MatchList span reaches delta_t or at the stream-end
  // flush. Fragments double as seeds for the maximality closure.
  const double win = params.refine_window();
  std::map<TrajId, std::vector<Candidate>> seeds;

  auto process_front = [&](std::int32_t f) {
    std::int32_t wend = f;
    const double limit = st.p_times[f] + win;
    while (wend + 1 < n && st.p_times[wend + 1] <= limit) ++wend;
    const ResultT rt = intersect_window(st, f, wend);
    auto frags = window_sweep(rt, params);
    if (opts.collect_fragments) {
      out.fragments.insert(out.fragments.end(), frags.begin(), frags.end());
    }
    for (const auto& fr : frags) {
      const PartnerData& pd = st.partners.at(fr.partner);
      const auto xl = static_cast<std::int32_t>(
          std::lower_bound(pd.xt.begin(), pd.xt.end(), fr.partner_t0) - pd.xt.begin());
      const auto xr = static_cast<std::int32_t>(
          std::lower_bound(pd.xt.begin(), pd.xt.end(), fr.partner_t1) - pd.xt.begin());
      seeds[fr.partner].push_back(Candidate{f, wend, xl, xr});
    }
  };

  std::int32_t front = 0;
  for (std::int32_t e = 1; e < n; ++e) {
    if (st.p_times[e - 1] - st.p_times[front] >= params.delta_t) {
      process_front(front);
      ++front;
    }
  }
  while (front < n) {
    process_front(front);
    ++front;
  }

  // Closure: grow every seed (window fragments first, then each joining
  // edge as a completeness backstop) to its maximal valid pair.
  const double w_raw = params.lifespan_threshold();
  for (const auto& [x, pd] : st.partners) {
    if (pd.xt.empty()) continue;
    std::vector<Candidate> results;
    auto try_seed = [&](const Candidate& c) {
      for (const auto& r : results) {
        if (r.contains(c)) return;
      }
      if (!candidate_valid(pd, c)) return;
      const Candidate g = grow_maximal(st, pd, c);
      const double lifespan = std::min(st.p_times[g.pr], pd.xt[g.xr]) -
                              std::max(st.p_times[g.pl], pd.xt[g.xl]);
      if (lifespan < w_raw) return;
      for (const auto& r : results) {
        if (r == g) return;
      }
      results.push_back(g);
    };

    if (auto it = seeds.find(x); it != seeds.end()) {
      for (const auto& c : it->second) try_seed(c);
    }
    for (std::int32_t e = 0; e < n; ++e) {
      for (std::int32_t k : pd.padj[e]) try_seed(Candidate{e, e, k, k});
    }

    for (const auto& g : results) {
      out.pairs.push_back(TimeRangePair{st.ref, x, st.p_times[g.pl], st.p_times[g.pr],
                                        pd.xt[g.xl], pd.xt[g.xr]});
    }
  }

  std::sort(out.pairs.begin(), out.pairs.end(), [](const TimeRangePair& a, const TimeRangePair& b) {
    return std::tie(a.partner, a.ref_t0, a.ref_t1, a.partner_t0, a.partner_t1) <
           std::tie(b.partner, b.ref_t0, b.ref_t1, b.partner_t0, b.partner_t1);
  });
  return out;
}

}  // namespace dtj
