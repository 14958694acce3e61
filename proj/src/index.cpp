#include "dtj/index.hpp"

#include <algorithm>
#include <array>
#include <cassert>
#include <chrono>
#include <stdexcept>

#include "dtj/geometry.hpp"

namespace dtj {

namespace {

struct BuildItem {
  Rect region;
  std::vector<std::pair<double, double>> pts;
  int depth;
  std::int32_t node;
};

bool all_same_location(const std::vector<std::pair<double, double>>& pts) {
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (pts[i] != pts[0]) return false;
  }
  return true;
}

// Quadrant of (x, y) inside region: bit 0 = east, bit 1 = north. Points on a
// split line go east/north.
int quadrant(const Rect& r, double x, double y) {
  const double mx = (r.x0 + r.x1) / 2.0;
  const double my = (r.y0 + r.y1) / 2.0;
  return (x >= mx ? 1 : 0) + (y >= my ? 2 : 0);
}

Rect child_region(const Rect& r, int q) {
  const double mx = (r.x0 + r.x1) / 2.0;
  const double my = (r.y0 + r.y1) / 2.0;
  switch (q) {
    case 0: return Rect{r.x0, r.y0, mx, my};
    case 1: return Rect{mx, r.y0, r.x1, my};
    case 2: return Rect{r.x0, my, mx, r.y1};
    default: return Rect{mx, my, r.x1, r.y1};
  }
}

}  // namespace

QuadTree QuadTree::build(std::span<const TrajectoryPoint> sample,
                         std::uint32_t max_points_per_cell, const Rect& root) {
  if (sample.empty()) throw std::invalid_argument("QuadTree::build: empty sample");
  if (max_points_per_cell < 1) throw std::invalid_argument("QuadTree::build: threshold must be >= 1");

  QuadTree tree;
  tree.nodes_.push_back(Node{root, -1, kNoCell});

  std::vector<std::pair<double, double>> pts;
  pts.reserve(sample.size());
  for (const auto& p : sample) pts.emplace_back(p.x, p.y);

  // Explicit preorder DFS so leaf ids come out in preorder.
  std::vector<BuildItem> stack;
  stack.push_back(BuildItem{root, std::move(pts), 0, 0});
  while (!stack.empty()) {
    BuildItem item = std::move(stack.back());
    stack.pop_back();
    tree.height_ = std::max(tree.height_, item.depth);

    const bool split = item.pts.size() > max_points_per_cell && item.depth < kDepthCap &&
                       !all_same_location(item.pts);
    if (!split) {
      tree.nodes_[item.node].leaf_id = tree.leaf_count_++;
      tree.leaf_nodes_.push_back(static_cast<std::uint32_t>(item.node));
      continue;
    }

    const std::int32_t first = static_cast<std::int32_t>(tree.nodes_.size());
    tree.nodes_[item.node].first_child = first;
    std::array<std::vector<std::pair<double, double>>, 4> parted;
    for (const auto& pq : item.pts) parted[quadrant(item.region, pq.first, pq.second)].push_back(pq);
    for (int q = 0; q < 4; ++q) {
      tree.nodes_.push_back(Node{child_region(item.region, q), -1, kNoCell});
    }
    // Push in reverse so child 0 is processed first (preorder numbering).
    for (int q = 3; q >= 0; --q) {
      stack.push_back(BuildItem{child_region(item.region, q), std::move(parted[q]),
                                item.depth + 1, first + q});
    }
  }
  return tree;
}

std::uint32_t QuadTree::locate(double x, double y) const {
  const Rect& root = nodes_[0].region;
  x = std::clamp(x, root.x0, root.x1);
  y = std::clamp(y, root.y0, root.y1);
  std::size_t node = 0;
  while (nodes_[node].first_child >= 0) {
    node = nodes_[node].first_child + quadrant(nodes_[node].region, x, y);
  }
  return nodes_[node].leaf_id;
}

void QuadTree::locate_expanded(double x, double y, double eps,
                               std::vector<std::uint32_t>& out) const {
  out.clear();
  // Depth is capped at kDepthCap, so a fixed stack suffices (hot path: one
  // call per ingested point).
  std::uint32_t stack[3 * kDepthCap + 8];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const std::uint32_t node = stack[--top];
    if (!nodes_[node].region.contains_expanded(x, y, eps)) continue;
    if (nodes_[node].first_child < 0) {
      out.push_back(nodes_[node].leaf_id);
      continue;
    }
    for (int q = 3; q >= 0; --q) stack[top++] = nodes_[node].first_child + q;
  }
}

const Rect& QuadTree::leaf_region(std::uint32_t leaf_id) const {
  return nodes_[leaf_nodes_.at(leaf_id)].region;
}

std::vector<QuadTreeLeaf> QuadTree::to_leaves() const {
  std::vector<QuadTreeLeaf> out;
  out.reserve(leaf_count_);
  for (std::uint32_t id = 0; id < leaf_count_; ++id) {
    out.push_back(QuadTreeLeaf{id, nodes_[leaf_nodes_[id]].region});
  }
  return out;
}

QuadTree QuadTree::from_leaves(const Rect& root, const std::vector<QuadTreeLeaf>& leaves) {
  if (leaves.empty()) throw std::invalid_argument("QuadTree::from_leaves: no leaves");
  QuadTree tree;
  tree.nodes_.push_back(Node{root, -1, kNoCell});
  tree.leaf_nodes_.assign(leaves.size(), 0);
  tree.leaf_count_ = static_cast<std::uint32_t>(leaves.size());

  struct Item {
    Rect region;
    std::vector<const QuadTreeLeaf*> leaves;
    int depth;
    std::int32_t node;
  };
  std::vector<const QuadTreeLeaf*> all;
  all.reserve(leaves.size());
  for (const auto& l : leaves) all.push_back(&l);

  std::vector<Item> stack;
  stack.push_back(Item{root, std::move(all), 0, 0});
  while (!stack.empty()) {
    Item item = std::move(stack.back());
    stack.pop_back();
    tree.height_ = std::max(tree.height_, item.depth);
    if (item.leaves.size() == 1 && item.leaves[0]->region == item.region) {
      tree.nodes_[item.node].leaf_id = item.leaves[0]->id;
      tree.leaf_nodes_.at(item.leaves[0]->id) = static_cast<std::uint32_t>(item.node);
      continue;
    }
    const std::int32_t first = static_cast<std::int32_t>(tree.nodes_.size());
    tree.nodes_[item.node].first_child = first;
    std::array<std::vector<const QuadTreeLeaf*>, 4> parted;
    for (const QuadTreeLeaf* l : item.leaves) {
      // A leaf nests in exactly one child; classify by its centre.
      const double cx = (l->region.x0 + l->region.x1) / 2.0;
      const double cy = (l->region.y0 + l->region.y1) / 2.0;
      parted[quadrant(item.region, cx, cy)].push_back(l);
    }
    for (int q = 0; q < 4; ++q) {
      if (parted[q].empty()) {
        throw std::runtime_error("QuadTree::from_leaves: leaf list does not tile the root");
      }
      tree.nodes_.push_back(Node{child_region(item.region, q), -1, kNoCell});
    }
    for (int q = 3; q >= 0; --q) {
      stack.push_back(Item{child_region(item.region, q), std::move(parted[q]), item.depth + 1,
                           first + q});
    }
  }
  return tree;
}

void index_insert(JoinBuffer& buf, const QuadTree& tree, SpatialIndex& spi,
                  TrajectoryIndex& tri, std::uint32_t pos, const JoinParams& params,
                  std::vector<std::uint32_t>& scratch) {
  TrajectoryPoint& p = buf.d[pos];
  p.cell_id = tree.locate(p.x, p.y);

  tree.locate_expanded(p.x, p.y, params.eps_sp, scratch);
  bool has_own = false;
  for (std::uint32_t leaf : scratch) {
    auto& list = spi.per_leaf[leaf];
    if (list.empty()) list.reserve(128);  // keeps growth off tiny heap blocks
    list.push_back(pos);
    has_own = has_own || leaf == p.cell_id;
  }
  spi.entries += scratch.size();
  if (!has_own) {  // clamped out-of-root point
    spi.per_leaf[p.cell_id].push_back(pos);
    ++spi.entries;
  }

  auto& positions = tri.per_traj[p.traj];
  if (positions.empty()) positions.reserve(64);
  positions.push_back(pos);
  ++tri.entries;
}

SpiCandidateIter::SpiCandidateIter(const SpatialIndex& spi, const JoinBuffer& buf,
                                   std::uint32_t i) {
  const std::uint32_t cell = buf.d[i].cell_id;
  list_ = &spi.per_leaf[cell];
  auto it = std::lower_bound(list_->begin(), list_->end(), i);
  assert(it != list_->end() && *it == i);
  cursor_ = (it - list_->begin()) - 1;
}

std::optional<std::uint32_t> SpiCandidateIter::next() {
  if (cursor_ < 0) return std::nullopt;
  return (*list_)[cursor_--];
}

std::optional<std::uint32_t> tri_prev_point(const TrajectoryIndex& tri, TrajId traj,
                                            std::uint32_t pos) {
  auto it = tri.per_traj.find(traj);
  if (it == tri.per_traj.end()) throw std::out_of_range("tri_prev_point: unknown trajectory");
  const auto& v = it->second;
  auto p = std::lower_bound(v.begin(), v.end(), pos);
  assert(p != v.end() && *p == pos);
  if (p == v.begin()) return std::nullopt;
  return *(p - 1);
}

std::optional<std::uint32_t> tri_next_point(const TrajectoryIndex& tri, TrajId traj,
                                            std::uint32_t pos) {
  auto it = tri.per_traj.find(traj);
  if (it == tri.per_traj.end()) throw std::out_of_range("tri_next_point: unknown trajectory");
  const auto& v = it->second;
  auto p = std::upper_bound(v.begin(), v.end(), pos);
  if (p == v.end()) return std::nullopt;
  return *p;
}

bool find_match_indexed(const TrajectoryIndex& tri, const JoinBuffer& buf, TrajId anchor_traj,
                        std::uint32_t k, const JoinParams& params) {
  auto it = tri.per_traj.find(anchor_traj);
  if (it == tri.per_traj.end()) return false;
  const auto& v = it->second;
  const TrajectoryPoint& target = buf.d[k];
  const double eps2 = params.eps_sp * params.eps_sp;
  auto from = std::lower_bound(v.begin(), v.end(), target.t - params.eps_t,
                               [&](std::uint32_t p, double t) { return buf.d[p].t < t; });
  for (; from != v.end() && buf.d[*from].t <= target.t + params.eps_t; ++from) {
    if (detail::dist_s2(target, buf.d[*from]) <= eps2) return true;
  }
  return false;
}

std::vector<PairRecord> join_partition_indexed(const Split& split, const QuadTree& tree,
                                               const JoinParams& params, JoinStats* stats,
                                               IndexStats* index_stats) {
  using clock = std::chrono::steady_clock;
  std::vector<PairRecord> out;
  JoinBuffer buf;
  buf.d.reserve(split.points.size());
  buf.matched.reserve(split.points.size());
  SpatialIndex spi;
  spi.reset(tree.leaf_count());
  TrajectoryIndex tri;
  const DupCheck dup = DupCheck::base_range(split.base, split.last);
  const double eps2 = params.eps_sp * params.eps_sp;

  std::vector<std::uint32_t> scratch;
  double build_seconds = 0.0;
  double prev_t = -std::numeric_limits<double>::infinity();

  // The split carries exactly the bloated base range plus each trajectory's
  // adjacent points, so every arriving point is ingested.
  for (const auto& p : split.points) {
    if (p.t < prev_t) {
      throw std::runtime_error("join_partition_indexed: corrupt split, unsorted input");
    }
    prev_t = p.t;

    const std::uint32_t i = buf.push(p);
    // Build time is estimated from every 8th insert; per-call clocks would
    // otherwise dominate the measurement on large splits.
    if ((i & 7u) == 0) {
      const auto t0 = clock::now();
      index_insert(buf, tree, spi, tri, i, params, scratch);
      build_seconds += 8.0 * std::chrono::duration<double>(clock::now() - t0).count();
    } else {
      index_insert(buf, tree, spi, tri, i, params, scratch);
    }

    const TrajectoryPoint pi = buf.d[i];
    const bool dup_i = dup(pi);
    SpiCandidateIter cand(spi, buf, i);
    while (auto jo = cand.next()) {
      const std::uint32_t j = *jo;
      if (pi.t - buf.d[j].t > params.eps_t) break;
      if (buf.d[j].traj == pi.traj) continue;
      if (detail::dist_s2(pi, buf.d[j]) > eps2) continue;

      const bool dup_j = dup(buf.d[j]);
      buf.matched[i] = 1;
      buf.matched[j] = 1;
      if (dup_i) out.push_back(PairRecord{pi, buf.d[j], true});
      if (dup_j) out.push_back(PairRecord{buf.d[j], pi, true});
      detail::note_match(buf, i, j);
      detail::note_match(buf, j, i);

      if (dup_i) {
        if (auto k = tri_prev_point(tri, buf.d[j].traj, j);
            k && !find_match_indexed(tri, buf, pi.traj, *k, params)) {
          out.push_back(PairRecord{pi, buf.d[*k], false});
        }
      }
      if (dup_j) {
        if (auto k = tri_prev_point(tri, pi.traj, i);
            k && !find_match_indexed(tri, buf, buf.d[j].traj, *k, params)) {
          out.push_back(PairRecord{buf.d[j], buf.d[*k], false});
        }
      }
    }
  }

  if (stats) {
    for (const auto& r : out) {
      if (r.kind() == RecordKind::JoiningPair) ++stats->jp;
      else if (r.kind() == RecordKind::CandidateSNJP) ++stats->snjp_candidates;
    }
  }

  auto next_fn = [&](std::uint32_t pos) { return tri_next_point(tri, buf.d[pos].traj, pos); };
  auto match_fn = [&](TrajId anchor, std::uint32_t pos) {
    return find_match_indexed(tri, buf, anchor, pos, params);
  };
  detail::treat_last_tr_points(buf, params, dup, next_fn, match_fn, out, stats);
  detail::emit_breaking_points(buf, dup, out, stats);

  if (index_stats) {
    index_stats->spi_entries += spi.entries;
    index_stats->tri_entries += tri.entries;
    index_stats->build_seconds += build_seconds;
  }
  return out;
}

}  // namespace dtj
