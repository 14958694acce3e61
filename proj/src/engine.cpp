#include "dtj/engine.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <thread>
#include <tuple>

#include "dtj/index.hpp"
#include "dtj/partitioning.hpp"

namespace dtj {

namespace {

using clock_t_ = std::chrono::steady_clock;

double seconds_since(clock_t_::time_point t0) {
  return std::chrono::duration<double>(clock_t_::now() - t0).count();
}

// Bounded worker pool over n independent tasks. The first failure wins and
// is rethrown with its task id.
void parallel_tasks(int workers, std::size_t n, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  workers = std::max(1, std::min<int>(workers, static_cast<int>(n)));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex err_mtx;
  std::exception_ptr err;
  std::size_t err_task = 0;
  auto body = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mtx);
        if (!err) {
          err = std::current_exception();
          err_task = i;
        }
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& th : pool) th.join();
  if (err) {
    try {
      std::rethrow_exception(err);
    } catch (const std::exception& e) {
      throw PipelineError("task " + std::to_string(err_task) + " failed: " + e.what());
    }
  }
}

// Record spill format for the two-job DTJb pipeline.
void write_records(const std::filesystem::path& path, const std::vector<PairRecord>& recs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PipelineError("cannot write intermediate file: " + path.string());
  const std::uint64_t count = recs.size();
  out.write(reinterpret_cast<const char*>(&count), 8);
  auto put_point = [&](const TrajectoryPoint& p) {
    out.write(reinterpret_cast<const char*>(&p.traj), 4);
    out.write(reinterpret_cast<const char*>(&p.t), 8);
    out.write(reinterpret_cast<const char*>(&p.x), 8);
    out.write(reinterpret_cast<const char*>(&p.y), 8);
  };
  for (const auto& r : recs) {
    put_point(r.ref);
    const std::uint8_t has_other = r.other ? 1 : 0;
    out.write(reinterpret_cast<const char*>(&has_other), 1);
    if (r.other) put_point(*r.other);
    const std::uint8_t flag = r.flag ? 1 : 0;
    out.write(reinterpret_cast<const char*>(&flag), 1);
  }
}

std::vector<PairRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PipelineError("cannot read intermediate file: " + path.string());
  std::uint64_t count = 0;
  in.read(reinterpret_cast<char*>(&count), 8);
  std::vector<PairRecord> out;
  out.reserve(count);
  auto get_point = [&](TrajectoryPoint& p) {
    in.read(reinterpret_cast<char*>(&p.traj), 4);
    in.read(reinterpret_cast<char*>(&p.t), 8);
    in.read(reinterpret_cast<char*>(&p.x), 8);
    in.read(reinterpret_cast<char*>(&p.y), 8);
  };
  for (std::uint64_t i = 0; i < count; ++i) {
    PairRecord r;
    get_point(r.ref);
    std::uint8_t has_other = 0;
    in.read(reinterpret_cast<char*>(&has_other), 1);
    if (has_other) {
      TrajectoryPoint o;
      get_point(o);
      r.other = o;
    }
    std::uint8_t flag = 0;
    in.read(reinterpret_cast<char*>(&flag), 1);
    r.flag = flag != 0;
    if (!in) throw PipelineError("truncated intermediate file: " + path.string());
    out.push_back(std::move(r));
  }
  return out;
}

// Sorted trajectory timestamps, for mapping result timestamps back to
// point indices.
struct TrajTimes {
  std::vector<std::vector<double>> times;

  std::uint32_t index_of(TrajId traj, double t) const {
    const auto& v = times.at(traj);
    auto it = std::lower_bound(v.begin(), v.end(), t);
    if (it == v.end() || *it != t) {
      throw PipelineError("result timestamp does not match any point");
    }
    return static_cast<std::uint32_t>(it - v.begin());
  }
};

struct CanonicalKey {
  TrajId a;
  double a_t0, a_t1;
  TrajId b;
  double b_t0, b_t1;

  friend bool operator==(const CanonicalKey&, const CanonicalKey&) = default;
  friend bool operator<(const CanonicalKey& x, const CanonicalKey& y) {
    return std::tie(x.a, x.a_t0, x.a_t1, x.b, x.b_t0, x.b_t1) <
           std::tie(y.a, y.a_t0, y.a_t1, y.b, y.b_t0, y.b_t1);
  }
};

// Unordered-pair canonicalization: smaller trajectory id first, exact
// dedup across the two reference directions.
void canonicalize(const std::vector<std::vector<TimeRangePair>>& per_task,
                  const std::vector<std::string>& id_table, const TrajTimes& tt,
                  RunOutput& out) {
  std::vector<CanonicalKey> keys;
  for (const auto& task : per_task) {
    for (const auto& p : task) {
      CanonicalKey k;
      if (p.ref <= p.partner) {
        k = CanonicalKey{p.ref, p.ref_t0, p.ref_t1, p.partner, p.partner_t0, p.partner_t1};
      } else {
        k = CanonicalKey{p.partner, p.partner_t0, p.partner_t1, p.ref, p.ref_t0, p.ref_t1};
      }
      keys.push_back(k);
    }
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());

  for (const auto& k : keys) {
    out.rows.push_back(ResultRow{id_table.at(k.a), k.a_t0, k.a_t1, id_table.at(k.b), k.b_t0,
                                 k.b_t1});
    MatchPair mp;
    mp.sub_r = Subtrajectory{k.a, tt.index_of(k.a, k.a_t0), tt.index_of(k.a, k.a_t1)};
    mp.sub_s = Subtrajectory{k.b, tt.index_of(k.b, k.b_t0), tt.index_of(k.b, k.b_t1)};
    mp.lifespan = Interval{std::max(k.a_t0, k.b_t0), std::min(k.a_t1, k.b_t1)};
    out.pairs.push_back(mp);
  }
  out.metrics.result_pairs = out.pairs.size();
}

void tally_records(const std::vector<PairRecord>& recs, RunMetrics& m) {
  for (const auto& r : recs) {
    switch (r.kind()) {
      case RecordKind::JoiningPair: ++m.records_jp; break;
      case RecordKind::BreakingPoint: ++m.records_bp; break;
      case RecordKind::CandidateSNJP: ++m.records_snjp; break;
    }
  }
}

// Shuffle plus refine, shared by all variants.
void reduce_phase(std::vector<std::vector<PairRecord>>&& per_task, const PipelineConfig& cfg,
                  const std::vector<std::string>& id_table, const TrajTimes& tt,
                  RunOutput& out) {
  auto t0 = clock_t_::now();
  if (cfg.keep_records) {
    for (const auto& task : per_task) {
      out.records.insert(out.records.end(), task.begin(), task.end());
    }
  }
  for (const auto& task : per_task) tally_records(task, out.metrics);
  auto groups = shuffle_group(std::move(per_task), &out.metrics.shuffle_bytes);
  out.metrics.wall_shuffle_s += seconds_since(t0);

  t0 = clock_t_::now();
  std::vector<std::vector<TimeRangePair>> refined(groups.size());
  parallel_tasks(cfg.workers, groups.size(), [&](std::size_t gi) {
    auto res = refine_trajectory(groups[gi].records, cfg.params, cfg.refine);
    refined[gi] = std::move(res.pairs);
  });
  out.metrics.wall_refine_s = seconds_since(t0);

  if (cfg.keep_per_ref) {
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
      out.per_ref[groups[gi].ref] = refined[gi];
    }
  }
  canonicalize(refined, id_table, tt, out);
}

RunOutput run_dtjb(const Dataset& data, const PipelineConfig& cfg) {
  RunOutput out;
  auto t0 = clock_t_::now();
  const auto points = data.sorted_points();
  out.metrics.input_points = points.size();
  out.metrics.input_bytes = points.size() * kPartRecordBytes;
  auto parts = uniform_temporal_partition(points, cfg.n_parts, cfg.params);
  if (!points.empty() && cfg.n_parts > 1) {
    const double width = (points.back().t - points.front().t) / cfg.n_parts;
    if (!check_partition_duration(points, width)) {
      std::cerr << "warning: partition duration does not exceed the largest sampling gap; "
                   "candidate coverage relies on the per-trajectory adjacency pulls\n";
    }
  }
  out.metrics.wall_partition_s = seconds_since(t0);
  for (const auto& p : parts) out.metrics.task_input_sizes.push_back(p.points.size());
  out.metrics.task_input_stddev = stddev(out.metrics.task_input_sizes);

  const auto tmp = cfg.workdir / "tmp";
  std::filesystem::create_directories(tmp);

  t0 = clock_t_::now();
  std::vector<std::filesystem::path> spills(parts.size());
  std::vector<double> task_s(parts.size(), 0.0);
  parallel_tasks(cfg.workers, parts.size(), [&](std::size_t i) {
    const auto task_t0 = clock_t_::now();
    auto recs = join_partition(parts[i], cfg.params);
    spills[i] = tmp / ("dtjb-join-" + std::to_string(i) + ".rec");
    write_records(spills[i], recs);
    task_s[i] = seconds_since(task_t0);
  });
  out.metrics.wall_join_s = seconds_since(t0);
  for (double s : task_s) out.metrics.join_task_s += s;

  // Second job: read the spilled join output back; the re-read is part of
  // the shuffle cost this variant pays for being two jobs.
  t0 = clock_t_::now();
  std::vector<std::vector<PairRecord>> per_task(spills.size());
  for (std::size_t i = 0; i < spills.size(); ++i) {
    per_task[i] = read_records(spills[i]);
    out.metrics.intermediate_bytes += std::filesystem::file_size(spills[i]);
  }
  out.metrics.wall_shuffle_s += seconds_since(t0);

  TrajTimes tt;
  tt.times.resize(data.trajectory_count());
  for (const auto& tr : data.trajectories()) {
    for (const auto& p : tr.points) tt.times[tr.id].push_back(p.t);
  }
  reduce_phase(std::move(per_task), cfg, data.ids(), tt, out);
  return out;
}

RunOutput run_repartitioned(const Dataset* data, const PipelineConfig& cfg) {
  RunOutput out;
  const auto manifest_path = cfg.workdir / kManifestName;
  DatasetManifest manifest = DatasetManifest::load(manifest_path);
  manifest.verify_checksums(cfg.workdir);
  if (cfg.variant == Variant::DTJi && !manifest.has_quadtree) {
    throw PipelineError(
        "manifest has no QuadTree; rerun `dtj repartition` with --quadtree-threshold");
  }
  if (data && data->point_count() != manifest.point_count) {
    throw PipelineError("workdir manifest does not match the supplied dataset");
  }

  auto t0 = clock_t_::now();
  std::vector<std::vector<TrajectoryPoint>> bins(manifest.parts.size());
  TrajTimes tt;
  tt.times.resize(manifest.id_table.size());
  for (std::size_t i = 0; i < manifest.parts.size(); ++i) {
    bins[i] = read_part_file(cfg.workdir / manifest.parts[i].file);
    for (const auto& p : bins[i]) {
      out.metrics.input_bytes += kPartRecordBytes;
      ++out.metrics.input_points;
      tt.times.at(p.traj).push_back(p.t);
    }
  }
  for (auto& v : tt.times) std::sort(v.begin(), v.end());

  std::vector<Interval> bases(manifest.parts.size());
  for (std::size_t i = 0; i < manifest.parts.size(); ++i) {
    bases[i] = Interval{manifest.parts[i].base_lo, manifest.parts[i].base_hi};
  }
  auto splits = build_splits(bins, bases, cfg.params, manifest.k);
  out.metrics.wall_partition_s = seconds_since(t0);
  for (const auto& s : splits) out.metrics.task_input_sizes.push_back(s.points.size());
  out.metrics.task_input_stddev = stddev(out.metrics.task_input_sizes);

  QuadTree tree;
  if (cfg.variant == Variant::DTJi) {
    tree = QuadTree::from_leaves(manifest.bbox, manifest.quadtree_leaves);
  }

  t0 = clock_t_::now();
  std::vector<std::vector<PairRecord>> per_task(splits.size());
  std::vector<IndexStats> idx_stats(splits.size());
  std::vector<double> task_s(splits.size(), 0.0);
  parallel_tasks(cfg.workers, splits.size(), [&](std::size_t i) {
    const auto task_t0 = clock_t_::now();
    if (cfg.variant == Variant::DTJi) {
      per_task[i] = join_partition_indexed(splits[i], tree, cfg.params, nullptr, &idx_stats[i]);
    } else {
      per_task[i] = join_partition(splits[i], cfg.params);
    }
    task_s[i] = seconds_since(task_t0);
  });
  out.metrics.wall_join_s = seconds_since(t0);
  for (double s : task_s) out.metrics.join_task_s += s;
  for (const auto& st : idx_stats) {
    out.metrics.spi_entries += st.spi_entries;
    out.metrics.tri_entries += st.tri_entries;
    out.metrics.index_build_s += st.build_seconds;
  }

  reduce_phase(std::move(per_task), cfg, manifest.id_table, tt, out);
  return out;
}

}  // namespace

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::DTJb: return "dtjb";
    case Variant::DTJr: return "dtjr";
    case Variant::DTJi: return "dtji";
  }
  return "?";
}

std::optional<Variant> variant_from_name(const std::string& s) {
  if (s == "dtjb") return Variant::DTJb;
  if (s == "dtjr") return Variant::DTJr;
  if (s == "dtji") return Variant::DTJi;
  return std::nullopt;
}

double stddev(const std::vector<std::size_t>& values) {
  if (values.empty()) return 0.0;
  double mean = 0.0;
  for (auto v : values) mean += static_cast<double>(v);
  mean /= static_cast<double>(values.size());
  double acc = 0.0;
  for (auto v : values) {
    const double d = static_cast<double>(v) - mean;
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(values.size()));
}

std::size_t record_bytes(const PairRecord& r) {
  // point = 4 (traj) + 24 (t,x,y); +1 presence byte, +1 flag byte
  return 28 + 1 + (r.other ? 28 : 0) + 1;
}

std::vector<ShuffleGroup> shuffle_group(std::vector<std::vector<PairRecord>>&& per_task,
                                        std::size_t* shuffled_bytes) {
  std::vector<PairRecord> all;
  std::size_t total = 0;
  for (auto& task : per_task) total += task.size();
  all.reserve(total);
  std::size_t bytes = 0;
  for (auto& task : per_task) {
    for (auto& r : task) {
      bytes += record_bytes(r);
      all.push_back(std::move(r));
    }
    task.clear();
  }
  if (shuffled_bytes) *shuffled_bytes += bytes;

  auto key = [](const PairRecord& r) {
    const std::uint64_t partner = r.other ? static_cast<std::uint64_t>(r.other->traj) + 1 : 0;
    const double other_t = r.other ? r.other->t : 0.0;
    return std::make_tuple(r.ref.traj, r.ref.t, partner, other_t, r.flag);
  };
  std::sort(all.begin(), all.end(),
            [&](const PairRecord& a, const PairRecord& b) { return key(a) < key(b); });

  std::vector<ShuffleGroup> groups;
  for (auto& r : all) {
    if (groups.empty() || groups.back().ref != r.ref.traj) {
      groups.push_back(ShuffleGroup{r.ref.traj, {}});
    }
    groups.back().records.push_back(std::move(r));
  }
  return groups;
}

DatasetManifest preprocess(const Dataset& data, const std::filesystem::path& workdir,
                           const PreprocessConfig& cfg) {
  const auto points = data.sorted_points();
  if (points.empty()) throw PipelineError("preprocess: empty dataset");

  std::size_t m = cfg.m;
  if (m == 0) {
    if (cfg.block_size_bytes == 0) throw PipelineError("preprocess: need m or block size");
    m = compute_m(points.size() * kPartRecordBytes, cfg.block_size_bytes);
  }

  std::size_t target = static_cast<std::size_t>(
      std::ceil(cfg.sample_rate * static_cast<double>(points.size())));
  if (!cfg.explicit_rate) target = std::max(target, cfg.min_sample);
  target = std::min(target, points.size());
  target = std::max<std::size_t>(target, 1);
  const auto sample = reservoir_sample(points, target, cfg.seed);

  std::vector<double> sample_times;
  sample_times.reserve(sample.size());
  for (const auto& p : sample) sample_times.push_back(p.t);
  const auto hist = histogram_from_sample(std::move(sample_times), static_cast<int>(m));

  const auto bins = repartition(points, hist);
  const auto bases = bin_base_ranges(hist, points.front().t, points.back().t);

  DatasetManifest manifest;
  manifest.point_count = points.size();
  manifest.t_min = points.front().t;
  manifest.t_max = points.back().t;
  manifest.m = m;
  manifest.k = compute_group_factor(m, cfg.nodes);
  manifest.seed = cfg.seed;
  manifest.sample_size = sample.size();
  manifest.boundaries.assign(hist.interior().begin(), hist.interior().end());
  manifest.id_table = data.ids();

  Rect bbox{points.front().x, points.front().y, points.front().x, points.front().y};
  for (const auto& p : points) {
    bbox.x0 = std::min(bbox.x0, p.x);
    bbox.y0 = std::min(bbox.y0, p.y);
    bbox.x1 = std::max(bbox.x1, p.x);
    bbox.y1 = std::max(bbox.y1, p.y);
  }
  manifest.bbox = bbox;

  std::filesystem::create_directories(workdir / "parts");
  for (std::size_t i = 0; i < bins.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "parts/part-%05zu.bin", i);
    const auto path = workdir / name;
    write_part_file(path, bins[i]);
    ManifestPart part;
    part.file = name;
    part.count = bins[i].size();
    part.checksum = checksum_of_file(path);
    part.base_lo = bases[i].t_start;
    part.base_hi = bases[i].t_end;
    part.group_id = static_cast<int>(i / manifest.k);
    manifest.parts.push_back(std::move(part));
  }

  if (cfg.quadtree_threshold_pct > 0) {
    // The threshold is a population share, applied to the sample the tree is
    // built from so occupancy scales with the sampling rate.
    std::uint32_t threshold = static_cast<std::uint32_t>(std::max<std::size_t>(
        1, sample.size() * cfg.quadtree_threshold_pct / 100));
    manifest.has_quadtree = true;
    manifest.quadtree_threshold = threshold;
    // Split decisions come from the sample; the root covers the whole
    // dataset so no live point falls outside the tree.
    const auto tree = QuadTree::build(sample, threshold, bbox);
    manifest.quadtree_leaves = tree.to_leaves();
  }

  manifest.save(workdir / kManifestName);
  return manifest;
}

RunOutput run_pipeline(const Dataset* data, const PipelineConfig& cfg) {
  if (cfg.workdir.empty()) throw PipelineError("run_pipeline: workdir required");
  if (cfg.workers < 1) throw PipelineError("run_pipeline: workers must be >= 1");
  if (cfg.variant == Variant::DTJb) {
    if (!data) throw PipelineError("run_pipeline: DTJb needs the dataset");
    if (data->empty()) return RunOutput{};
    return run_dtjb(*data, cfg);
  }
  return run_repartitioned(data, cfg);
}

void write_metrics(const RunMetrics& m, Variant variant, int workers,
                   const std::filesystem::path& path, const std::filesystem::path& tasks_csv) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PipelineError("cannot write metrics: " + path.string());
  out << "variant=" << variant_name(variant) << '\n';
  out << "workers=" << workers << '\n';
  out << "input_points=" << m.input_points << '\n';
  out << "input_bytes=" << m.input_bytes << '\n';
  out << "join_tasks=" << m.task_input_sizes.size() << '\n';
  out << "join_input_stddev=" << format_double(m.task_input_stddev) << '\n';
  out << "records_jp=" << m.records_jp << '\n';
  out << "records_bp=" << m.records_bp << '\n';
  out << "records_snjp_candidates=" << m.records_snjp << '\n';
  out << "shuffle_bytes=" << m.shuffle_bytes << '\n';
  out << "intermediate_bytes=" << m.intermediate_bytes << '\n';
  out << "result_pairs=" << m.result_pairs << '\n';
  out << "wall_partition_s=" << format_double(m.wall_partition_s) << '\n';
  out << "wall_join_s=" << format_double(m.wall_join_s) << '\n';
  out << "join_task_s=" << format_double(m.join_task_s) << '\n';
  out << "wall_shuffle_s=" << format_double(m.wall_shuffle_s) << '\n';
  out << "wall_refine_s=" << format_double(m.wall_refine_s) << '\n';
  out << "wall_total_s=" << format_double(m.total_s()) << '\n';
  out << "spi_entries=" << m.spi_entries << '\n';
  out << "tri_entries=" << m.tri_entries << '\n';
  out << "index_build_s=" << format_double(m.index_build_s) << '\n';
  if (!tasks_csv.empty()) {
    std::ofstream tcsv(tasks_csv, std::ios::binary);
    tcsv << "task,input_points\n";
    for (std::size_t i = 0; i < m.task_input_sizes.size(); ++i) {
      tcsv << i << ',' << m.task_input_sizes[i] << '\n';
    }
  }
}

}  // namespace dtj
