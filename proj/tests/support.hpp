#pragma once

// Shared helpers for the test suites: randomized dataset construction across
// parameter regimes, pipeline drivers over throwaway workdirs, and the
// planted-instance builders used by the ablation suites.

#include <atomic>
#include <filesystem>
#include <random>
#include <unistd.h>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "dtj/engine.hpp"
#include "dtj/io.hpp"
#include "dtj/model.hpp"
#include "dtj/oracle.hpp"

namespace dtj::test {

struct RandomCase {
  Dataset data;
  JoinParams params;
};

// Random dataset small enough for the oracle: a handful of trajectories in a
// box a few eps_sp wide, so joining pairs, breaking points and candidate
// sNJPs all occur. Parameter regimes rotate with the seed, including the
// degenerate 2*eps_t >= delta_t one.
inline RandomCase random_case(std::uint64_t seed, std::size_t max_traj = 8,
                              std::size_t max_pts = 30) {
  std::mt19937_64 rng(seed);
  auto uni = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  auto pick = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };

  const std::size_t n_traj = pick(3, max_traj);
  const double width = static_cast<double>(pick(2, 8));  // in eps_sp units
  std::vector<std::tuple<std::string, double, double, double>> rows;
  for (std::size_t ti = 0; ti < n_traj; ++ti) {
    const std::size_t n_pts = pick(5, max_pts);
    const double t_span = static_cast<double>(n_pts);
    std::set<double> times;
    while (times.size() < n_pts) times.insert(uni(0.0, t_span));
    char name[32];
    std::snprintf(name, sizeof(name), "t%02u", static_cast<unsigned>(ti));
    double x = uni(0.0, width), y = uni(0.0, width);
    for (double t : times) {
      x = std::clamp(x + uni(-0.8, 0.8), 0.0, width);
      y = std::clamp(y + uni(-0.8, 0.8), 0.0, width);
      rows.emplace_back(name, t, x, y);
    }
  }

  JoinParams params;
  params.eps_sp = 1.0;
  switch (seed % 4) {
    case 0: params.eps_t = 0.4; params.delta_t = 4.0; break;
    case 1: params.eps_t = 1.0; params.delta_t = 6.0; break;
    case 2: params.eps_t = 2.0; params.delta_t = 3.0; break;  // 2*eps_t >= delta_t
    case 3: params.eps_t = 0.8; params.delta_t = 10.0; break;
  }
  return RandomCase{Dataset::from_rows(rows), params};
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<unsigned> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("dtj-test-" + tag + "-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Canonical comparison form of a result set.
inline std::vector<std::string> lines_of(const Dataset& data, const std::vector<MatchPair>& pairs) {
  return result_lines(rows_from_match_pairs(data, pairs));
}
inline std::vector<std::string> lines_of(const std::vector<ResultRow>& rows) {
  return result_lines(rows);
}

struct PipelineRuns {
  RunOutput dtjb;
  RunOutput dtjr;
  RunOutput dtji;
};

// Runs all three pipelines over a fresh workdir. M and threshold default to
// values that exercise multi-split execution on small data.
inline PipelineRuns run_all(const RandomCase& rc, int workers = 2, int n_parts = 3,
                            std::size_t m = 4, std::uint64_t seed = 99, bool keep_records = false) {
  TempDir dir("runall");
  PreprocessConfig pre;
  pre.m = m;
  pre.sample_rate = 1.0;
  pre.explicit_rate = true;
  pre.quadtree_threshold_pct = 20;
  pre.seed = seed;
  preprocess(rc.data, dir.path(), pre);

  PipelineRuns runs;
  PipelineConfig cfg;
  cfg.workers = workers;
  cfg.n_parts = n_parts;
  cfg.params = rc.params;
  cfg.workdir = dir.path();
  cfg.keep_records = keep_records;

  cfg.variant = Variant::DTJb;
  runs.dtjb = run_pipeline(&rc.data, cfg);
  cfg.variant = Variant::DTJr;
  runs.dtjr = run_pipeline(&rc.data, cfg);
  cfg.variant = Variant::DTJi;
  runs.dtji = run_pipeline(&rc.data, cfg);
  return runs;
}

// Record identity for duplicate detection.
inline std::string record_key(const PairRecord& r) {
  std::ostringstream os;
  os << r.ref.traj << '@' << format_double(r.ref.t) << '|';
  if (r.other) os << r.other->traj << '@' << format_double(r.other->t);
  os << '|' << (r.flag ? 'T' : 'F');
  return os.str();
}

// Planted breaking-point instance: r and s co-move in lockstep, but s's
// sample at the plant index is displaced far away. Both it and its lockstep
// partner become breaking points, and an algorithm unaware of breaking
// points bridges the gap into one oversized match.
inline RandomCase planted_bp_case(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t n = 9 + static_cast<std::size_t>(rng() % 8);
  const std::size_t plant = n / 2 + (rng() % 2);
  std::vector<std::tuple<std::string, double, double, double>> rows;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i);
    rows.emplace_back("r", t, t * 0.1, 0.0);
    const double y = (i == plant) ? 500.0 : 0.3;
    rows.emplace_back("s", t, t * 0.1, y);
  }
  JoinParams params{1.0, 0.4, 2.0};
  return RandomCase{Dataset::from_rows(rows), params};
}

// Planted sNJP instance: as above, but the displaced sample keeps a partner
// in a third trajectory w so it is a non-joining point rather than a
// breaking one w.r.t. the whole dataset.
inline RandomCase planted_snjp_case(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t n = 9 + static_cast<std::size_t>(rng() % 8);
  const std::size_t plant = n / 2 + (rng() % 2);
  std::vector<std::tuple<std::string, double, double, double>> rows;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i);
    rows.emplace_back("r", t, t * 0.1, 0.0);
    const double y = (i == plant) ? 500.0 : 0.3;
    rows.emplace_back("s", t, t * 0.1, y);
  }
  const double tp = static_cast<double>(plant);
  rows.emplace_back("w", tp, tp * 0.1, 500.3);
  // eps_t above the sampling gap: the reference point opposite the plant
  // keeps diagonal partners, so only the candidate-sNJP channel reports the
  // displaced sample.
  JoinParams params{1.0, 1.2, 4.0};
  return RandomCase{Dataset::from_rows(rows), params};
}

}  // namespace dtj::test
