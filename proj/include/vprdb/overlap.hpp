#pragma once

#include <cstdint>
#include <filesystem>
#include <unordered_map>
#include <utility>
#include <vector>

#include "vprdb/geometry.hpp"

namespace vprdb {

/// Per-frame voxel sets for one sequence, indexed by position. The frame_ids
/// entry gives the external id of each position.
struct FrameVoxelSets {
  std::vector<int> frame_ids;
  std::vector<FrameVoxelSet> sets;

  std::size_t size() const { return sets.size(); }
};

/// voxel -> indices of the frames observing it (each index appears once per
/// voxel because frame sets are deduplicated).
struct InvertedVoxelIndex {
  std::unordered_map<VoxelKey, std::vector<std::uint32_t>, VoxelKeyHash> postings;
  std::vector<std::uint32_t> frame_sizes;  // |voxels(frame)| by frame position
};

/// Sparse symmetric table of pairwise intersection counts; only pairs that
/// share at least one voxel are present.
class PairOverlapTable {
 public:
  void add(std::uint32_t i, std::uint32_t j, std::uint32_t count) {
    counts_[pack(i, j)] += count;
  }
  std::uint32_t intersection(std::uint32_t i, std::uint32_t j) const {
    const auto it = counts_.find(pack(i, j));
    return it == counts_.end() ? 0u : it->second;
  }
  std::size_t pair_count() const { return counts_.size(); }

  struct Entry {
    std::uint32_t i;
    std::uint32_t j;
    std::uint32_t intersection;
  };
  /// All stored pairs with i < j, ordered by (i, j).
  std::vector<Entry> sorted_entries() const;

  void merge(const PairOverlapTable& other) {
    for (const auto& [key, count] : other.counts_) counts_[key] += count;
  }

 private:
  static std::uint64_t pack(std::uint32_t i, std::uint32_t j) {
    if (i > j) std::swap(i, j);
    return (static_cast<std::uint64_t>(i) << 32) | j;
  }
  std::unordered_map<std::uint64_t, std::uint32_t> counts_;
};

/// Builds the voxel -> frames index. Throws InputError if every frame set is
/// empty, since no overlap can ever be computed then.
InvertedVoxelIndex build_inverted_index(const FrameVoxelSets& frames);

/// Accumulates pairwise intersection counts from the inverted index. The cost
/// is the sum over voxels of C(k, 2) for posting-list length k, independent of
/// the number of frame pairs. The result does not depend on `threads`.
PairOverlapTable count_pair_intersections(const InvertedVoxelIndex& index, int threads = 0);

/// Directed coverage |A ∩ B| / |A|: how much of frame A the other frame sees.
double coverage_overlap(std::uint32_t intersection, std::uint32_t size_a);

/// Symmetric intersection-over-union |A ∩ B| / |A ∪ B|.
double iou_overlap(std::uint32_t intersection, std::uint32_t size_a, std::uint32_t size_b);

/// Reference O(N^2) intersection counting via per-pair set walks. Only for
/// cross-checking the indexed path; refuses more than 500 frames.
PairOverlapTable naive_pairwise(const FrameVoxelSets& frames);

/// Writes "i,j,intersection,size_i,size_j,iou" rows for all stored pairs,
/// using external frame ids, ordered by (i, j) position.
void write_overlap_csv(const std::filesystem::path& path, const FrameVoxelSets& frames,
                       const PairOverlapTable& table);

}  // namespace vprdb
