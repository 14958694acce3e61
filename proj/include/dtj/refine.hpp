#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dtj/model.hpp"

namespace dtj {

/// One MatchList entry: a reference point in time order with its joining
/// partners sorted by trajectory id. Breaking points carry an empty partner
/// sequence; they advance the timeline and break every intersection across
/// them.
struct MatchListEntry {
  double t = 0.0;
  std::vector<std::pair<TrajId, double>> partners;  // (partner id, partner time)
};
using MatchList = std::vector<MatchListEntry>;

/// Candidate-sNJP records, keyed by (reference entry, partner trajectory).
struct FalseListEntry {
  std::int32_t entry = 0;
  TrajId partner = 0;
  double partner_t = 0.0;
};
using FalseList = std::vector<FalseListEntry>;

/// Intersected partner structure for one qualifying window: partner
/// trajectories joining every reference point of the window, with the span of
/// their matched points. excluded marks partners vetoed by a verified
/// FalseList point strictly inside the span.
struct ResultT {
  double window_t0 = 0.0;
  double window_t1 = 0.0;
  struct Survivor {
    TrajId partner = 0;
    double span_t0 = 0.0;
    double span_t1 = 0.0;
    bool excluded = false;
  };
  std::vector<Survivor> survivors;
};

/// One confirmed window pair (an element of resultF).
struct WindowFragment {
  TrajId partner = 0;
  double ref_t0 = 0.0;
  double ref_t1 = 0.0;
  double partner_t0 = 0.0;
  double partner_t1 = 0.0;
};

/// Subtrajectory pair in time form: reference side and partner side given by
/// their endpoint timestamps.
struct TimeRangePair {
  TrajId ref = 0;
  TrajId partner = 0;
  double ref_t0 = 0.0;
  double ref_t1 = 0.0;
  double partner_t0 = 0.0;
  double partner_t1 = 0.0;

  friend bool operator==(const TimeRangePair&, const TimeRangePair&) = default;
};

struct RefineOptions {
  bool collect_fragments = false;  // expose per-window resultF for inspection
  bool ignore_bp = false;          // ablation: drop breaking-point records
  bool ignore_false = false;       // ablation: drop candidate-sNJP records
};

struct RefineOutput {
  std::vector<TimeRangePair> pairs;       // maximal, deduplicated, sorted
  std::vector<WindowFragment> fragments;  // when collect_fragments
};

/// Emits the window pairs confirmed by one intersected window: every
/// non-excluded survivor yields a subtrajectory pair covering the window.
/// Successive calls over successive front windows realize the sliding
/// delta_t - 2*eps_t window of the refine phase.
std::vector<WindowFragment> window_sweep(const ResultT& result_t, const JoinParams& params);

/// Full refine for one reference trajectory. records must be sorted by
/// (reference time, partner trajectory id); unsorted input is a hard failure.
/// Produces exactly the maximal matching subtrajectory pairs derivable from
/// the record stream: window pairs are merged and extended into maximal form,
/// and every candidate is validated against the stream's joining structure
/// before emission.
RefineOutput refine_trajectory(std::span<const PairRecord> records, const JoinParams& params,
                               const RefineOptions& opts = {});

}  // namespace dtj
