#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dtj/index.hpp"
#include "dtj/model.hpp"

namespace dtj {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Shortest round-trip decimal form of a double; canonical across the
/// project so result files diff byte-for-byte.
std::string format_double(double v);

/// CSV with header `traj_id,t,x,y`. Rejects NaN/inf, malformed rows (error
/// names the line), and duplicate (traj_id, t) pairs (error names the
/// trajectory).
Dataset parse_dataset_csv(const std::filesystem::path& path);
void write_dataset_csv(const Dataset& data, const std::filesystem::path& path);

/// Fixed-width binary partition format: a small header, then 32-byte records
/// (u32 trajectory index, u32 pad, f64 t, f64 x, f64 y), little-endian. The
/// trajectory index refers to the manifest id table.
void write_part_file(const std::filesystem::path& path, std::span<const TrajectoryPoint> points);
std::vector<TrajectoryPoint> read_part_file(const std::filesystem::path& path);

inline constexpr std::size_t kPartRecordBytes = 32;

std::uint64_t fnv1a_file(const std::filesystem::path& path);
std::string checksum_of_file(const std::filesystem::path& path);

struct ManifestPart {
  std::string file;
  std::size_t count = 0;
  std::string checksum;
  double base_lo = 0.0;
  double base_hi = 0.0;
  int group_id = 0;
};

/// Sidecar metadata for a repartitioned workdir: stands in for the
/// distributed filesystem's metadata plus the shared read-only cache the
/// indexed join loads its tree from.
struct DatasetManifest {
  int schema_version = 1;
  std::size_t point_count = 0;
  double t_min = 0.0;
  double t_max = 0.0;
  Rect bbox;
  std::size_t m = 0;
  std::size_t k = 1;
  std::uint64_t seed = 0;
  std::size_t sample_size = 0;
  std::vector<double> boundaries;  // interior histogram boundaries (M-1 values)
  std::vector<std::string> id_table;
  std::vector<ManifestPart> parts;

  bool has_quadtree = false;
  std::uint32_t quadtree_threshold = 0;
  std::vector<QuadTreeLeaf> quadtree_leaves;

  void save(const std::filesystem::path& path) const;
  static DatasetManifest load(const std::filesystem::path& path);

  /// Throws when a part file's checksum no longer matches.
  void verify_checksums(const std::filesystem::path& workdir) const;
};

inline constexpr const char* kManifestName = "manifest.json";

struct GenSpec {
  std::size_t n_traj = 10;
  std::size_t points_per_traj = 50;
  double duration = 1000.0;
  double area = 1000.0;
  /// Temporal skew factor s: a ceil(s * points) share of every trajectory's
  /// points lands in the first (1-s) fraction of the time range. 0.5 is
  /// uniform.
  double skew = 0.5;
  std::size_t group_size = 1;
  double group_span_frac = 0.5;
  double eps_sp = 10.0;  // co-moving trajectories stay within eps_sp/2 of a shared path
  std::uint64_t seed = 1;
};

/// Reproducible synthetic trajectories: co-moving groups follow a shared
/// path for a sub-interval, guaranteeing nontrivial maximal matches; the
/// skew factor concentrates points early in the time range.
Dataset generate_dataset(const GenSpec& spec);

struct ResultRow {
  std::string a;
  double a_t0 = 0.0, a_t1 = 0.0;
  std::string b;
  double b_t0 = 0.0, b_t1 = 0.0;
};

std::vector<ResultRow> rows_from_match_pairs(const Dataset& data,
                                             const std::vector<MatchPair>& pairs);

/// Serializes rows as `traj_a,start_t_a,end_t_a,traj_b,start_t_b,end_t_b`
/// lines and sorts them lexicographically, so result files can be diffed
/// byte-for-byte.
std::vector<std::string> result_lines(const std::vector<ResultRow>& rows);
void write_result_csv(const std::vector<ResultRow>& rows, const std::filesystem::path& path);

}  // namespace dtj
