#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <set>

#include "dtj/engine.hpp"
#include "dtj/join.hpp"
#include "dtj/oracle.hpp"
#include "dtj/refine.hpp"
#include "support.hpp"

using namespace dtj;
using namespace dtj::test;

namespace {

// One-partition join + shuffle, returning the group for a chosen reference.
std::vector<PairRecord> group_for(const Dataset& d, const JoinParams& params,
                                  const std::string& ref_name) {
  const auto pts = d.sorted_points();
  std::vector<std::vector<PairRecord>> per_task;
  per_task.push_back(
      join_partition(std::span<const TrajectoryPoint>(pts), params, DupCheck::flag()));
  const auto groups = shuffle_group(std::move(per_task), nullptr);
  for (const auto& g : groups) {
    if (d.id_name(g.ref) == ref_name) return g.records;
  }
  return {};
}

// The Refine-phase working example: p with seven points, r co-moving
// throughout, q co-moving except its sixth sample, which matches nothing.
Fixture refine_example() {
  std::vector<std::tuple<std::string, double, double, double>> rows;
  for (int i = 1; i <= 7; ++i) {
    const double t = static_cast<double>(i);
    rows.emplace_back("p", t, 0.1 * t, 0.0);
    rows.emplace_back("r", t, 0.1 * t, 0.2);
    if (i != 6) rows.emplace_back("q", t, 0.1 * t, -0.2);
  }
  rows.emplace_back("q", 6.0, 600.0, 600.0);
  return Fixture{Dataset::from_rows(rows), JoinParams{1.0, 1.0, 6.0}};
}

}  // namespace

TEST_CASE("T1 reference r refines to the full lockstep pair") {
  const Fixture fx = make_t1();
  const auto recs = group_for(fx.data, fx.params, "r");
  REQUIRE(!recs.empty());
  const auto out = refine_trajectory(recs, fx.params);
  REQUIRE(out.pairs.size() == 1);
  CHECK(out.pairs[0].ref_t0 == 0.0);
  CHECK(out.pairs[0].ref_t1 == 4.0);
  CHECK(out.pairs[0].partner_t0 == 0.0);
  CHECK(out.pairs[0].partner_t1 == 4.0);
  CHECK(fx.data.id_name(out.pairs[0].partner) == "s");
}

TEST_CASE("refine working example: FalseList trims q after the displaced sample") {
  const Fixture fx = refine_example();
  const auto recs = group_for(fx.data, fx.params, "p");
  RefineOptions opts;
  opts.collect_fragments = true;
  const auto out = refine_trajectory(recs, fx.params, opts);

  const TrajId q = 1, r = 2;  // lexicographic interning: p=0, q=1, r=2
  REQUIRE(fx.data.id_name(q) == "q");
  REQUIRE(fx.data.id_name(r) == "r");

  // First window [1, 5]: both q and r confirm with spans [1, 5].
  bool q_first = false, r_first = false, q_crossing = false;
  for (const auto& f : out.fragments) {
    if (f.ref_t0 == 1.0 && f.ref_t1 == 5.0) {
      if (f.partner == q) {
        q_first = true;
        CHECK(f.partner_t0 == 1.0);
        CHECK(f.partner_t1 == 5.0);
      }
      if (f.partner == r) {
        r_first = true;
        CHECK(f.partner_t0 == 1.0);
        CHECK(f.partner_t1 >= 5.0);  // r@6 also pairs with p@5 diagonally
      }
    }
    // No q window may span its displaced sample at t=6.
    if (f.partner == q && f.partner_t0 < 6.0 && f.partner_t1 > 6.0) q_crossing = true;
  }
  CHECK(q_first);
  CHECK(r_first);
  CHECK_FALSE(q_crossing);

  // Final results: r pairs across the whole span, q stops before t=6.
  std::map<TrajId, std::pair<double, double>> spans;
  for (const auto& p : out.pairs) {
    spans[p.partner] = {p.partner_t0, p.partner_t1};
  }
  REQUIRE(spans.count(q) == 1);
  CHECK(spans[q].first == 1.0);
  CHECK(spans[q].second == 5.0);
  REQUIRE(spans.count(r) == 1);
  CHECK(spans[r].second == 7.0);
}

TEST_CASE("a stream of only breaking points yields nothing") {
  const Fixture fx = make_t1();
  const auto recs = group_for(fx.data, fx.params, "u");
  REQUIRE(recs.size() == 1);
  const auto out = refine_trajectory(recs, fx.params);
  CHECK(out.pairs.empty());
}

TEST_CASE("degenerate window: single-point matches merge into maximal pairs") {
  Fixture fx = make_t1();
  fx.params.eps_t = 2.0;  // 2*eps_t > delta_t = 3
  const auto expected = lines_of(fx.data, oracle_join(fx.data, fx.params));
  const auto runs = run_all(RandomCase{fx.data, fx.params}, 1, 2);
  CHECK(lines_of(runs.dtjr.rows) == expected);
}

TEST_CASE("unsorted stream is a hard failure") {
  const Fixture fx = make_t1();
  auto recs = group_for(fx.data, fx.params, "r");
  REQUIRE(recs.size() >= 2);
  std::swap(recs.front(), recs.back());
  CHECK_THROWS_AS(refine_trajectory(recs, fx.params), std::runtime_error);
}

TEST_CASE("window_sweep emits one fragment per confirmed survivor") {
  ResultT rt;
  rt.window_t0 = 0.0;
  rt.window_t1 = 4.0;
  rt.survivors.push_back({7, 0.5, 3.5, false});
  rt.survivors.push_back({9, 0.0, 4.0, true});  // vetoed by the FalseList
  const auto frags = window_sweep(rt, JoinParams{1, 1, 3});
  REQUIRE(frags.size() == 1);
  CHECK(frags[0].partner == 7);
  CHECK(frags[0].partner_t0 == 0.5);
}

TEST_CASE("refine equals the oracle per reference trajectory") {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    const auto rc = random_case(seed, 5, 20);
    const auto expected = oracle_join(rc.data, rc.params);
    std::set<std::string> expected_keys;
    for (const auto& mp : expected) {
      const auto& A = rc.data.trajectory(mp.sub_r.traj).points;
      const auto& B = rc.data.trajectory(mp.sub_s.traj).points;
      expected_keys.insert(std::to_string(mp.sub_r.traj) + ":" +
                           format_double(A[mp.sub_r.start_idx].t) + ":" +
                           format_double(A[mp.sub_r.end_idx].t) + ":" +
                           std::to_string(mp.sub_s.traj) + ":" +
                           format_double(B[mp.sub_s.start_idx].t) + ":" +
                           format_double(B[mp.sub_s.end_idx].t));
    }

    std::set<std::string> got;
    for (TrajId ref = 0; ref < rc.data.trajectory_count(); ++ref) {
      const auto recs = group_for(rc.data, rc.params, rc.data.id_name(ref));
      if (recs.empty()) continue;
      const auto out = refine_trajectory(recs, rc.params);
      for (const auto& p : out.pairs) {
        TrajId a = p.ref, b = p.partner;
        double a0 = p.ref_t0, a1 = p.ref_t1, b0 = p.partner_t0, b1 = p.partner_t1;
        if (a > b) {
          std::swap(a, b);
          std::swap(a0, b0);
          std::swap(a1, b1);
        }
        got.insert(std::to_string(a) + ":" + format_double(a0) + ":" + format_double(a1) + ":" +
                   std::to_string(b) + ":" + format_double(b0) + ":" + format_double(b1));
      }
    }
    INFO("seed ", seed);
    CHECK(got == expected_keys);
  }
}

TEST_CASE("ablations on planted instances misbehave; the full refine stays exact") {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    SUBCASE("ignoring breaking points bridges the planted gap") {
      const auto rc = planted_bp_case(seed);
      const auto expected = lines_of(rc.data, oracle_join(rc.data, rc.params));

      TempDir dir("ablbp");
      PreprocessConfig pre;
      pre.m = 2;
      pre.sample_rate = 1.0;
      pre.explicit_rate = true;
      preprocess(rc.data, dir.path(), pre);
      PipelineConfig cfg;
      cfg.variant = Variant::DTJr;
      cfg.params = rc.params;
      cfg.workdir = dir.path();
      const auto full = run_pipeline(&rc.data, cfg);
      CHECK(lines_of(full.rows) == expected);

      // Ablated pipeline: operates solely on joining pairs, unaware of
      // breaking points (and a fortiori of the candidate list).
      cfg.refine.ignore_bp = true;
      cfg.refine.ignore_false = true;
      const auto ablated = run_pipeline(&rc.data, cfg);
      INFO("seed ", seed);
      CHECK(lines_of(ablated.rows) != expected);
    }
    SUBCASE("ignoring the FalseList overreaches across the planted sNJP") {
      const auto rc = planted_snjp_case(seed);
      const auto expected = lines_of(rc.data, oracle_join(rc.data, rc.params));

      TempDir dir("ablsn");
      PreprocessConfig pre;
      pre.m = 2;
      pre.sample_rate = 1.0;
      pre.explicit_rate = true;
      preprocess(rc.data, dir.path(), pre);
      PipelineConfig cfg;
      cfg.variant = Variant::DTJr;
      cfg.params = rc.params;
      cfg.workdir = dir.path();
      const auto full = run_pipeline(&rc.data, cfg);
      CHECK(lines_of(full.rows) == expected);

      cfg.refine.ignore_false = true;
      const auto ablated = run_pipeline(&rc.data, cfg);
      INFO("seed ", seed);
      CHECK(lines_of(ablated.rows) != expected);
    }
  }
}
