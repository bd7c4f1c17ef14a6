#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "vprdb/graph_select.hpp"
#include "vprdb/overlap.hpp"
#include "vprdb/sequence_io.hpp"

namespace vprdb {

struct DatabaseStats {
  std::size_t sequence_size = 0;  // frames in the loaded sequence
  std::size_t db_size = 0;
  double reduction_rate = 0.0;  // sequence_size / db_size
  double spatial_coverage_percent = 0.0;
  std::size_t excluded_frames = 0;  // frames with no usable voxels
};

/// Table-style stats: reduction rate over the full sequence, coverage as the
/// percentage of map voxels seen by the union of database frames.
DatabaseStats compute_stats(const DatabaseSelection& selection, const FrameVoxelSets& frames,
                            std::size_t sequence_size, std::size_t excluded_frames);

/// Formats a reduction rate the way the stats table prints it: "x960".
std::string format_reduction_rate(double rate);

/// Query q is considered at the same place as database frame d when d covers
/// strictly more than gt_threshold of q's voxels.
bool ground_truth_match(std::uint32_t intersection, std::uint32_t query_size, double gt_threshold);

/// Unit-length descriptor per frame id; dimension is uniform.
struct DescriptorSet {
  std::size_t dimension = 0;
  std::unordered_map<int, std::vector<double>> vectors;
};

/// Parses "frame_id v_1 ... v_D" lines ('#' comments allowed) and normalizes
/// every vector to unit length, so dot products are cosine similarities.
/// Ragged dimensions, non-finite values, zero vectors and duplicate ids are
/// all rejected.
DescriptorSet load_descriptors(const std::filesystem::path& path);

void save_descriptors(const std::filesystem::path& path, const DescriptorSet& descriptors);

struct RetrievalRow {
  int query_id = 0;
  int rank = 0;  // 1-based
  int db_id = 0;
  double similarity = 0.0;
  bool correct = false;
};

struct RetrievalResult {
  std::vector<RetrievalRow> rows;  // grouped per query in input order
  int k = 1;
  std::size_t evaluated_queries = 0;  // queries with at least one true match
  std::size_t recalled_queries = 0;
  std::size_t queries_without_gt = 0;
  double recall = 0.0;  // recalled / evaluated
};

/// Ranks database frames per query by cosine similarity (ties broken by
/// smaller db id) and scores the top k against is_match. Queries for which no
/// database frame matches at all are excluded from the recall denominator and
/// counted in queries_without_gt. is_match must be safe to call concurrently.
RetrievalResult recall_at_k(const std::vector<int>& db_ids, const std::vector<int>& query_ids,
                            const DescriptorSet& descriptors, int k,
                            const std::function<bool(int, int)>& is_match, int threads = 0);

void write_retrieval_csv(const std::filesystem::path& path, const RetrievalResult& result);

struct FinetuneEntry {
  int frame_id = 0;
  int class_db_id = 0;
  std::string color_path;
};

struct FinetuneSplit {
  std::vector<FinetuneEntry> train;
  std::vector<FinetuneEntry> validation;  // every frame with id % 5 == 0
};

/// Splits the classed frames into train/validation manifests; frame ids
/// divisible by 5 go to validation.
FinetuneSplit export_finetune_split(const FrameVoxelSets& frames, const ClassAssignment& classes,
                                    const ScanSequence& sequence);

/// Writes "frame_id,class_db_id,color_path" rows.
void write_finetune_manifest(const std::filesystem::path& path,
                             const std::vector<FinetuneEntry>& entries);

}  // namespace vprdb
