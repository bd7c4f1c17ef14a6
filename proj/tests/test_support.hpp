#pragma once

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "vprdb/graph_select.hpp"
#include "vprdb/overlap.hpp"

namespace vprdb::test {

/// Unique scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& prefix) {
    static std::atomic<unsigned> counter{0};
    const unsigned id = counter.fetch_add(1);
    dir_ = std::filesystem::temp_directory_path() /
           (prefix + "_" + std::to_string(::getpid()) + "_" + std::to_string(id));
    std::filesystem::create_directories(dir_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

/// Builds a graph directly from an edge list; self-loops and duplicates are
/// dropped. All edges get the same IoU weight.
inline OverlapGraph make_graph(std::size_t n,
                               const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges,
                               double mu = 0.3, double iou = 0.9) {
  OverlapGraph graph;
  graph.mu = mu;
  graph.vertex_count = n;
  graph.neighbors.resize(n);
  graph.edge_iou.resize(n);
  for (const auto& [a, b] : edges) {
    if (a == b) continue;
    if (std::find(graph.neighbors[a].begin(), graph.neighbors[a].end(), b) !=
        graph.neighbors[a].end()) {
      continue;
    }
    graph.neighbors[a].push_back(b);
    graph.neighbors[b].push_back(a);
  }
  for (std::size_t v = 0; v < n; ++v) {
    std::sort(graph.neighbors[v].begin(), graph.neighbors[v].end());
    graph.edge_iou[v].assign(graph.neighbors[v].size(), iou);
  }
  return graph;
}

inline OverlapGraph path_graph(std::size_t n) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  for (std::uint32_t v = 0; v + 1 < n; ++v) edges.emplace_back(v, v + 1);
  return make_graph(n, edges);
}

inline OverlapGraph random_graph(std::mt19937_64& rng, std::size_t n, std::size_t edge_count) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  edges.reserve(edge_count);
  for (std::size_t e = 0; e < edge_count; ++e) {
    edges.emplace_back(static_cast<std::uint32_t>(rng() % n),
                       static_cast<std::uint32_t>(rng() % n));
  }
  return make_graph(n, edges);
}

/// Random sorted voxel set drawn from a universe of keys (id, 0, 0).
inline FrameVoxelSet random_voxel_set(std::mt19937_64& rng, std::size_t universe,
                                      std::size_t min_size, std::size_t max_size) {
  const std::size_t size = min_size + rng() % (max_size - min_size + 1);
  FrameVoxelSet set;
  set.reserve(size);
  for (std::size_t i = 0; i < size; ++i) {
    set.push_back(VoxelKey{static_cast<std::int32_t>(rng() % universe), 0, 0});
  }
  std::sort(set.begin(), set.end());
  set.erase(std::unique(set.begin(), set.end()), set.end());
  return set;
}

inline FrameVoxelSets random_frames(std::mt19937_64& rng, std::size_t count, std::size_t universe,
                                    std::size_t min_size, std::size_t max_size) {
  FrameVoxelSets frames;
  for (std::size_t f = 0; f < count; ++f) {
    frames.frame_ids.push_back(static_cast<int>(f));
    frames.sets.push_back(random_voxel_set(rng, universe, min_size, max_size));
  }
  return frames;
}

/// Random point on the unit sphere, from raw engine bits so the sequence is
/// identical on every platform.
inline std::vector<double> random_unit_vector(std::mt19937_64& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double norm_sq = 0.0;
  while (norm_sq == 0.0) {
    for (auto& x : v) {
      // Box-Muller on two 53-bit uniforms.
      const double u1 = (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
      const double u2 = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      x = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }
    norm_sq = std::inner_product(v.begin(), v.end(), v.begin(), 0.0);
  }
  const double inv = 1.0 / std::sqrt(norm_sq);
  for (auto& x : v) x *= inv;
  return v;
}

inline std::uint32_t sorted_intersection_size(const FrameVoxelSet& a, const FrameVoxelSet& b) {
  std::uint32_t count = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++count;
      ++ia;
      ++ib;
    }
  }
  return count;
}

/// Size of the smallest dominating set by checking all 2^n vertex subsets.
/// Independent of the solver under test; usable up to ~20 vertices.
inline std::size_t brute_force_min_dominating_size(const OverlapGraph& graph) {
  const std::size_t n = graph.vertex_count;
  if (n == 0) return 0;
  std::vector<std::uint64_t> closed(n, 0);
  for (std::size_t v = 0; v < n; ++v) {
    closed[v] = std::uint64_t{1} << v;
    for (const std::uint32_t nb : graph.neighbors[v]) closed[v] |= std::uint64_t{1} << nb;
  }
  const std::uint64_t target = (std::uint64_t{1} << n) - 1;
  std::size_t best = n;
  for (std::uint64_t subset = 1; subset < (std::uint64_t{1} << n); ++subset) {
    const auto size = static_cast<std::size_t>(__builtin_popcountll(subset));
    if (size >= best) continue;
    std::uint64_t covered = 0;
    for (std::size_t v = 0; v < n; ++v) {
      if (subset & (std::uint64_t{1} << v)) covered |= closed[v];
    }
    if (covered == target) best = size;
  }
  return best;
}

}  // namespace vprdb::test
