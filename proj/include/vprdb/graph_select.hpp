#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vprdb/overlap.hpp"

namespace vprdb {

/// Undirected frame-overlap graph: edge (i,j) exists iff IoU(i,j) > mu.
/// Vertices are frame positions 0..vertex_count-1; adjacency lists are sorted
/// and carry the IoU of each edge in a parallel array.
struct OverlapGraph {
  std::size_t vertex_count = 0;
  std::vector<std::vector<std::uint32_t>> neighbors;
  std::vector<std::vector<double>> edge_iou;
  double mu = 0.0;
};

/// Frames chosen as the database, as positions into the originating
/// FrameVoxelSets, sorted ascending.
struct DatabaseSelection {
  std::vector<std::uint32_t> db_positions;
  std::string algorithm;  // "greedy" or "exact"
  double mu = 0.0;
};

/// Frame position -> database frame position, with the IoU that justified the
/// assignment (1.0 for database frames, which map to themselves).
struct ClassAssignment {
  std::vector<std::uint32_t> class_of;
  std::vector<double> iou;
};

/// Thresholds the overlap table into a graph. Requires 0 < mu < 1.
OverlapGraph build_graph(const std::vector<std::uint32_t>& frame_sizes,
                         const PairOverlapTable& table, double mu);

/// Number of vertices neither in `candidate` nor adjacent to a member.
/// Zero exactly when candidate is a dominating set.
std::size_t coverage_loss(const std::vector<std::uint32_t>& candidate, const OverlapGraph& graph);

/// Greedy dominating set: repeatedly picks the vertex whose closed
/// neighborhood covers the most uncovered vertices, ties by smallest vertex.
DatabaseSelection greedy_dominating_set(const OverlapGraph& graph);

/// Minimum dominating set by exhaustive search in lexicographic order, so the
/// result is the lexicographically smallest among all minimum sets. Refuses
/// graphs larger than vertex_limit (default 20, hard cap 30).
DatabaseSelection exact_dominating_set(const OverlapGraph& graph, std::size_t vertex_limit = 20);

/// Assigns every vertex to its best database neighbor by IoU (ties by
/// smallest database position). Database vertices map to themselves.
ClassAssignment assign_classes(const DatabaseSelection& selection, const OverlapGraph& graph);

/// Writes selected external frame ids, one per line, sorted.
void write_database_manifest(const std::filesystem::path& path, const FrameVoxelSets& frames,
                             const DatabaseSelection& selection);

/// Writes "frame_id,class_db_id,iou" rows for every frame, ordered by frame.
void write_class_csv(const std::filesystem::path& path, const FrameVoxelSets& frames,
                     const ClassAssignment& classes);

}  // namespace vprdb
