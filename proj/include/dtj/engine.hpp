#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dtj/io.hpp"
#include "dtj/join.hpp"
#include "dtj/model.hpp"
#include "dtj/refine.hpp"

namespace dtj {

enum class Variant { DTJb, DTJr, DTJi };

std::string variant_name(Variant v);
std::optional<Variant> variant_from_name(const std::string& s);

struct PipelineConfig {
  Variant variant = Variant::DTJb;
  int workers = 1;
  int n_parts = 4;  // DTJb uniform partition count
  JoinParams params;
  std::filesystem::path workdir;  // preprocessed dir for DTJr/DTJi; spill dir for DTJb

  // Test hooks.
  bool keep_records = false;
  bool keep_per_ref = false;
  RefineOptions refine;
};

struct RunMetrics {
  std::vector<std::size_t> task_input_sizes;  // join-phase input points per task
  double task_input_stddev = 0.0;
  std::size_t input_points = 0;
  std::size_t records_jp = 0;
  std::size_t records_bp = 0;
  std::size_t records_snjp = 0;
  std::size_t shuffle_bytes = 0;
  std::size_t intermediate_bytes = 0;  // DTJb job-1 spill volume
  std::size_t input_bytes = 0;
  std::size_t result_pairs = 0;
  double wall_partition_s = 0.0;
  double wall_join_s = 0.0;
  double join_task_s = 0.0;  // summed per-task join time (CPU-like, across workers)
  double wall_shuffle_s = 0.0;
  double wall_refine_s = 0.0;
  std::size_t spi_entries = 0;
  std::size_t tri_entries = 0;
  double index_build_s = 0.0;

  double total_s() const {
    return wall_partition_s + wall_join_s + wall_shuffle_s + wall_refine_s;
  }
};

/// Population standard deviation.
double stddev(const std::vector<std::size_t>& values);

/// Writes the line-oriented key=value report, plus a per-task CSV when
/// tasks_csv is non-empty.
void write_metrics(const RunMetrics& m, Variant variant, int workers,
                   const std::filesystem::path& path,
                   const std::filesystem::path& tasks_csv = {});

struct RunOutput {
  std::vector<ResultRow> rows;      // canonical, sorted
  std::vector<MatchPair> pairs;     // canonical index form
  RunMetrics metrics;
  std::vector<PairRecord> records;  // when cfg.keep_records
  std::map<TrajId, std::vector<TimeRangePair>> per_ref;  // when cfg.keep_per_ref
};

struct PipelineError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Groups join emissions by reference trajectory and sorts each group by
/// (reference time, partner trajectory id); accounts the shuffled volume.
struct ShuffleGroup {
  TrajId ref = 0;
  std::vector<PairRecord> records;
};
std::vector<ShuffleGroup> shuffle_group(std::vector<std::vector<PairRecord>>&& per_task,
                                        std::size_t* shuffled_bytes);

/// Serialized size of one record, used for shuffle and spill accounting.
std::size_t record_bytes(const PairRecord& r);

struct PreprocessConfig {
  std::size_t m = 0;                // bin count; 0 = derive from block_size
  std::size_t block_size_bytes = 0; // used when m == 0
  double sample_rate = 0.01;
  std::size_t min_sample = 10000;   // sample floor when using the default rate
  bool explicit_rate = false;       // CLI passed --sample-rate: no floor
  std::uint32_t quadtree_threshold_pct = 0;  // 0 = no tree
  std::size_t nodes = 1;            // collocation group size driver
  std::uint64_t seed = 0;
};

/// The repartitioning step: equi-depth histogram from a seeded sample, M
/// sorted binary part files, manifest with base ranges and (optionally) the
/// QuadTree leaf layout. Performed once per dataset, independent of query
/// parameters.
DatasetManifest preprocess(const Dataset& data, const std::filesystem::path& workdir,
                           const PreprocessConfig& cfg);

/// Runs one pipeline end to end. DTJb requires `data`; DTJr/DTJi read the
/// preprocessed workdir (data may be null). Results are canonical unordered
/// pairs, each reported once with the lexicographically smaller id first.
RunOutput run_pipeline(const Dataset* data, const PipelineConfig& cfg);

}  // namespace dtj
