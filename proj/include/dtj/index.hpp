#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "dtj/join.hpp"
#include "dtj/model.hpp"

namespace dtj {

struct Rect {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  bool contains(double x, double y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
  bool contains_expanded(double x, double y, double eps) const {
    return x >= x0 - eps && x <= x1 + eps && y >= y0 - eps && y <= y1 + eps;
  }
  friend bool operator==(const Rect&, const Rect&) = default;
};

struct QuadTreeLeaf {
  std::uint32_t id = 0;
  Rect region;
};

/// Space partitioning built once from a sample; holds only the leaf layout,
/// never data points. Leaf ids are preorder creation order and stable across
/// serialization.
class QuadTree {
 public:
  static constexpr int kDepthCap = 20;

  /// Splits any node whose sample count exceeds max_points_per_cell, down to
  /// the depth cap; a node whose sample is a single repeated location becomes
  /// a leaf regardless. root picks the region (normally the dataset bounding
  /// box so live data never falls outside the tree).
  static QuadTree build(std::span<const TrajectoryPoint> sample,
                        std::uint32_t max_points_per_cell, const Rect& root);

  /// Leaf containing (x, y); coordinates outside the root are clamped to the
  /// nearest leaf.
  std::uint32_t locate(double x, double y) const;

  /// Ids of every leaf whose region expanded by eps contains (x, y).
  void locate_expanded(double x, double y, double eps, std::vector<std::uint32_t>& out) const;

  std::uint32_t leaf_count() const { return leaf_count_; }
  int height() const { return height_; }
  const Rect& root_region() const { return nodes_[0].region; }
  const Rect& leaf_region(std::uint32_t leaf_id) const;

  /// Preorder leaf list; together with the root region this fully determines
  /// the tree, which from_leaves reconstructs by re-deriving the splits.
  std::vector<QuadTreeLeaf> to_leaves() const;
  static QuadTree from_leaves(const Rect& root, const std::vector<QuadTreeLeaf>& leaves);

 private:
  struct Node {
    Rect region;
    std::int32_t first_child = -1;  // four children contiguous; -1 for a leaf
    std::uint32_t leaf_id = kNoCell;
  };

  std::vector<Node> nodes_;
  std::vector<std::uint32_t> leaf_nodes_;  // leaf id -> node index
  std::uint32_t leaf_count_ = 0;
  int height_ = 0;
};

/// Per-leaf, temporally sorted buffer positions. A position is listed under
/// every leaf whose eps_sp-expanded region contains the point, so probing a
/// point's own leaf list is complete for spatial pruning.
struct SpatialIndex {
  std::vector<std::vector<std::uint32_t>> per_leaf;
  std::size_t entries = 0;

  void reset(std::uint32_t leaf_count) {
    per_leaf.assign(leaf_count, {});
    entries = 0;
  }
};

/// Per-trajectory, temporally sorted buffer positions.
struct TrajectoryIndex {
  std::unordered_map<TrajId, std::vector<std::uint32_t>> per_traj;
  std::size_t entries = 0;
};

/// Appends a point (already pushed into buf at position pos) to both indexes
/// and tags it with its original leaf.
void index_insert(JoinBuffer& buf, const QuadTree& tree, SpatialIndex& spi,
                  TrajectoryIndex& tri, std::uint32_t pos, const JoinParams& params,
                  std::vector<std::uint32_t>& scratch);

/// Positions from d[i]'s own leaf list strictly before i, newest first. The
/// caller stops iterating once the temporal constraint fails.
class SpiCandidateIter {
 public:
  SpiCandidateIter(const SpatialIndex& spi, const JoinBuffer& buf, std::uint32_t i);
  std::optional<std::uint32_t> next();

 private:
  const std::vector<std::uint32_t>* list_ = nullptr;
  std::ptrdiff_t cursor_ = -1;
};

/// Previous position of pos's trajectory via binary search in TrI; absent for
/// the trajectory's first buffered point. Throws on an unknown trajectory.
std::optional<std::uint32_t> tri_prev_point(const TrajectoryIndex& tri, TrajId traj,
                                            std::uint32_t pos);

/// Successor counterpart, used by the end-of-partition fix-up.
std::optional<std::uint32_t> tri_next_point(const TrajectoryIndex& tri, TrajId traj,
                                            std::uint32_t pos);

/// Same truth value as join.find_match, computed by binary-searching the
/// anchor trajectory's positions for the eps_t time range around d[k].
bool find_match_indexed(const TrajectoryIndex& tri, const JoinBuffer& buf, TrajId anchor_traj,
                        std::uint32_t k, const JoinParams& params);

struct IndexStats {
  std::size_t spi_entries = 0;
  std::size_t tri_entries = 0;
  double build_seconds = 0.0;
};

/// Indexed join of one split: ingests points inside the bloated base range,
/// sweeps with SpI candidates, probes with TrI, and applies the base-range
/// duplicate check. Record-for-record equivalent to the non-indexed kernel.
std::vector<PairRecord> join_partition_indexed(const Split& split, const QuadTree& tree,
                                               const JoinParams& params,
                                               JoinStats* stats = nullptr,
                                               IndexStats* index_stats = nullptr);

}  // namespace dtj
