#include "vprdb/graph_select.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <queue>
#include <string>

#include "vprdb/errors.hpp"

namespace vprdb {

OverlapGraph build_graph(const std::vector<std::uint32_t>& frame_sizes,
                         const PairOverlapTable& table, double mu) {
  if (!(mu > 0.0) || !(mu < 1.0)) {
    throw ConfigError("build_graph: overlap threshold must be in (0,1), got " + std::to_string(mu));
  }
  OverlapGraph graph;
  graph.mu = mu;
  graph.vertex_count = frame_sizes.size();
  graph.neighbors.resize(frame_sizes.size());
  graph.edge_iou.resize(frame_sizes.size());
  for (const auto& entry : table.sorted_entries()) {
    const double iou = iou_overlap(entry.intersection, frame_sizes[entry.i], frame_sizes[entry.j]);
    if (iou > mu) {
      graph.neighbors[entry.i].push_back(entry.j);
      graph.edge_iou[entry.i].push_back(iou);
      graph.neighbors[entry.j].push_back(entry.i);
      graph.edge_iou[entry.j].push_back(iou);
    }
  }
  // sorted_entries is ordered by (i, j), so each list built above is already
  // sorted for i-side appends; j-side appends arrive in i order, also sorted.
  return graph;
}

std::size_t coverage_loss(const std::vector<std::uint32_t>& candidate, const OverlapGraph& graph) {
  std::vector<char> covered(graph.vertex_count, 0);
  for (const std::uint32_t v : candidate) {
    if (v >= graph.vertex_count) {
      throw InputError("coverage_loss: vertex " + std::to_string(v) + " out of range (graph has " +
                       std::to_string(graph.vertex_count) + " vertices)");
    }
    covered[v] = 1;
    for (const std::uint32_t n : graph.neighbors[v]) covered[n] = 1;
  }
  std::size_t loss = 0;
  for (const char c : covered) {
    if (!c) ++loss;
  }
  return loss;
}

DatabaseSelection greedy_dominating_set(const OverlapGraph& graph) {
  DatabaseSelection selection;
  selection.algorithm = "greedy";
  selection.mu = graph.mu;

  const std::size_t n = graph.vertex_count;
  std::vector<char> covered(n, 0);
  std::vector<std::uint32_t> gain(n);
  for (std::size_t v = 0; v < n; ++v) {
    gain[v] = static_cast<std::uint32_t>(graph.neighbors[v].size()) + 1;
  }

  // Lazy greedy: gains only decrease as vertices get covered, so a popped
  // entry whose stored gain still matches its recomputed gain is a true
  // argmax. Ordering is (gain desc, vertex asc), matching the eager rule.
  using Entry = std::pair<std::uint32_t, std::uint32_t>;  // (gain, vertex)
  auto worse = [](const Entry& a, const Entry& b) {
    return a.first != b.first ? a.first < b.first : a.second > b.second;
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(worse)> queue(worse);
  for (std::size_t v = 0; v < n; ++v) {
    queue.push({gain[v], static_cast<std::uint32_t>(v)});
  }

  auto recompute = [&](std::uint32_t v) {
    std::uint32_t g = covered[v] ? 0u : 1u;
    for (const std::uint32_t nb : graph.neighbors[v]) {
      if (!covered[nb]) ++g;
    }
    return g;
  };

  std::size_t uncovered = n;
  while (uncovered > 0) {
    Entry top = queue.top();
    queue.pop();
    const std::uint32_t fresh = recompute(top.second);
    if (fresh != top.first) {
      queue.push({fresh, top.second});
      continue;
    }
    selection.db_positions.push_back(top.second);
    if (!covered[top.second]) {
      covered[top.second] = 1;
      --uncovered;
    }
    for (const std::uint32_t nb : graph.neighbors[top.second]) {
      if (!covered[nb]) {
        covered[nb] = 1;
        --uncovered;
      }
    }
  }
  std::sort(selection.db_positions.begin(), selection.db_positions.end());
  return selection;
}

namespace {

/// Depth-first lexicographic search over vertex combinations of a fixed size.
/// suffix_cover[v] is the union of closed neighborhoods of vertices >= v,
/// used to prune prefixes that can no longer reach full coverage.
bool find_cover_of_size(std::size_t size, std::uint32_t start, std::uint64_t mask,
                        std::uint64_t target, const std::vector<std::uint64_t>& closed,
                        const std::vector<std::uint64_t>& suffix_cover,
                        std::vector<std::uint32_t>& chosen) {
  if (size == 0) return mask == target;
  const std::uint32_t n = static_cast<std::uint32_t>(closed.size());
  if (start >= n) return false;
  if ((mask | suffix_cover[start]) != target) return false;
  for (std::uint32_t v = start; v + size <= n; ++v) {
    chosen.push_back(v);
    if (find_cover_of_size(size - 1, v + 1, mask | closed[v], target, closed, suffix_cover,
                           chosen)) {
      return true;
    }
    chosen.pop_back();
  }
  return false;
}

}  // namespace

DatabaseSelection exact_dominating_set(const OverlapGraph& graph, std::size_t vertex_limit) {
  constexpr std::size_t kHardCap = 30;
  if (vertex_limit > kHardCap) {
    throw ConfigError("exact_dominating_set: vertex limit " + std::to_string(vertex_limit) +
                      " exceeds the hard cap of " + std::to_string(kHardCap));
  }
  const std::size_t n = graph.vertex_count;
  if (n > vertex_limit) {
    throw ConfigError("exact_dominating_set: graph has " + std::to_string(n) +
                      " vertices, limit is " + std::to_string(vertex_limit) +
                      " (use the greedy selector)");
  }

  DatabaseSelection selection;
  selection.algorithm = "exact";
  selection.mu = graph.mu;
  if (n == 0) return selection;

  std::vector<std::uint64_t> closed(n, 0);
  for (std::size_t v = 0; v < n; ++v) {
    closed[v] = std::uint64_t{1} << v;
    for (const std::uint32_t nb : graph.neighbors[v]) closed[v] |= std::uint64_t{1} << nb;
  }
  std::vector<std::uint64_t> suffix_cover(n + 1, 0);
  for (std::size_t v = n; v-- > 0;) {
    suffix_cover[v] = suffix_cover[v + 1] | closed[v];
  }
  const std::uint64_t target = n == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n) - 1;

  // Smallest size first; within a size, DFS explores combinations in
  // lexicographic order, so the first hit is the lexicographically smallest
  // minimum dominating set.
  for (std::size_t size = 1; size <= n; ++size) {
    std::vector<std::uint32_t> chosen;
    chosen.reserve(size);
    if (find_cover_of_size(size, 0, 0, target, closed, suffix_cover, chosen)) {
      selection.db_positions = std::move(chosen);
      return selection;
    }
  }
  throw InternalError("exact_dominating_set: no dominating set found, graph state is corrupt");
}

ClassAssignment assign_classes(const DatabaseSelection& selection, const OverlapGraph& graph) {
  std::vector<char> in_db(graph.vertex_count, 0);
  for (const std::uint32_t v : selection.db_positions) in_db[v] = 1;

  ClassAssignment classes;
  classes.class_of.resize(graph.vertex_count);
  classes.iou.resize(graph.vertex_count);
  for (std::uint32_t v = 0; v < graph.vertex_count; ++v) {
    if (in_db[v]) {
      classes.class_of[v] = v;
      classes.iou[v] = 1.0;
      continue;
    }
    bool found = false;
    std::uint32_t best_db = 0;
    double best_iou = -1.0;
    const auto& nbs = graph.neighbors[v];
    for (std::size_t e = 0; e < nbs.size(); ++e) {
      if (!in_db[nbs[e]]) continue;
      const double iou = graph.edge_iou[v][e];
      // Strictly-better wins; neighbor lists ascend, so on ties the smaller
      // database position is kept.
      if (!found || iou > best_iou) {
        found = true;
        best_db = nbs[e];
        best_iou = iou;
      }
    }
    if (!found) {
      throw InternalError("assign_classes: frame position " + std::to_string(v) +
                          " has no database neighbor; selection is not a dominating set");
    }
    classes.class_of[v] = best_db;
    classes.iou[v] = best_iou;
  }
  return classes;
}

void write_database_manifest(const std::filesystem::path& path, const FrameVoxelSets& frames,
                             const DatabaseSelection& selection) {
  std::ofstream out(path);
  if (!out) {
    throw InputError("write_database_manifest: cannot open " + path.string() + " for writing");
  }
  for (const std::uint32_t v : selection.db_positions) {
    out << frames.frame_ids[v] << '\n';
  }
  if (!out) {
    throw InputError("write_database_manifest: write failed for " + path.string());
  }
}

void write_class_csv(const std::filesystem::path& path, const FrameVoxelSets& frames,
                     const ClassAssignment& classes) {
  std::ofstream out(path);
  if (!out) {
    throw InputError("write_class_csv: cannot open " + path.string() + " for writing");
  }
  out << "frame_id,class_db_id,iou\n";
  char line[96];
  for (std::size_t v = 0; v < classes.class_of.size(); ++v) {
    std::snprintf(line, sizeof(line), "%d,%d,%.17g\n", frames.frame_ids[v],
                  frames.frame_ids[classes.class_of[v]], classes.iou[v]);
    out << line;
  }
  if (!out) {
    throw InputError("write_class_csv: write failed for " + path.string());
  }
}

}  // namespace vprdb
