#include "vprdb/overlap.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <string>

#include "vprdb/errors.hpp"
#include "vprdb/parallel.hpp"

namespace vprdb {

std::vector<PairOverlapTable::Entry> PairOverlapTable::sorted_entries() const {
  std::vector<Entry> entries;
  entries.reserve(counts_.size());
  for (const auto& [key, count] : counts_) {
    entries.push_back({static_cast<std::uint32_t>(key >> 32),
                       static_cast<std::uint32_t>(key & 0xffffffffu), count});
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.i != b.i ? a.i < b.i : a.j < b.j;
  });
  return entries;
}

InvertedVoxelIndex build_inverted_index(const FrameVoxelSets& frames) {
  InvertedVoxelIndex index;
  index.frame_sizes.reserve(frames.size());
  bool any_voxels = false;
  for (std::uint32_t f = 0; f < frames.size(); ++f) {
    const FrameVoxelSet& set = frames.sets[f];
    index.frame_sizes.push_back(static_cast<std::uint32_t>(set.size()));
    if (!set.empty()) any_voxels = true;
    for (const VoxelKey& key : set) {
      index.postings[key].push_back(f);
    }
  }
  if (!frames.sets.empty() && !any_voxels) {
    throw InputError("build_inverted_index: every frame has an empty voxel set");
  }
  return index;
}

PairOverlapTable count_pair_intersections(const InvertedVoxelIndex& index, int threads) {
  // Stable posting order across runs: hash-map iteration order is
  // implementation-defined, so snapshot and sort the voxel keys first.
  std::vector<const std::vector<std::uint32_t>*> postings;
  {
    std::vector<std::pair<VoxelKey, const std::vector<std::uint32_t>*>> keyed;
    keyed.reserve(index.postings.size());
    for (const auto& [key, frames] : index.postings) keyed.emplace_back(key, &frames);
    std::sort(keyed.begin(), keyed.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    postings.reserve(keyed.size());
    for (const auto& [key, frames] : keyed) postings.push_back(frames);
  }

  // Extremely long posting lists make the quadratic inner loop dominate; the
  // run still completes, this is just a visibility aid for bad voxel sizes.
  constexpr std::size_t kHubWarnThreshold = 2048;
  std::size_t hubs = 0;
  for (const auto* list : postings) {
    if (list->size() >= kHubWarnThreshold) ++hubs;
  }
  if (hubs > 0) {
    std::fprintf(stderr, "warning: %zu voxels are shared by %zu+ frames; consider a smaller voxel size\n",
                 hubs, kHubWarnThreshold);
  }

  const int workers = resolve_threads(threads);
  std::vector<PairOverlapTable> shards(static_cast<std::size_t>(workers));
  parallel_for_sharded(postings.size(), workers, [&](std::size_t p, int shard) {
    const std::vector<std::uint32_t>& list = *postings[p];
    PairOverlapTable& table = shards[static_cast<std::size_t>(shard)];
    for (std::size_t a = 0; a + 1 < list.size(); ++a) {
      for (std::size_t b = a + 1; b < list.size(); ++b) {
        table.add(list[a], list[b], 1);
      }
    }
  });

  // Merge order is fixed (shard 0, 1, ...) and addition of counts commutes,
  // so the final table is identical for any worker count.
  PairOverlapTable result = std::move(shards[0]);
  for (std::size_t s = 1; s < shards.size(); ++s) result.merge(shards[s]);
  return result;
}

double coverage_overlap(std::uint32_t intersection, std::uint32_t size_a) {
  if (size_a == 0) {
    throw InternalError("coverage_overlap: frame has an empty voxel set");
  }
  return static_cast<double>(intersection) / static_cast<double>(size_a);
}

double iou_overlap(std::uint32_t intersection, std::uint32_t size_a, std::uint32_t size_b) {
  const std::uint64_t uni = static_cast<std::uint64_t>(size_a) + size_b - intersection;
  if (uni == 0) {
    throw InternalError("iou_overlap: both voxel sets are empty");
  }
  return static_cast<double>(intersection) / static_cast<double>(uni);
}

PairOverlapTable naive_pairwise(const FrameVoxelSets& frames) {
  constexpr std::size_t kMaxFrames = 500;
  if (frames.size() > kMaxFrames) {
    throw ConfigError("naive_pairwise: refusing " + std::to_string(frames.size()) +
                      " frames, limit is " + std::to_string(kMaxFrames) +
                      " (use count_pair_intersections)");
  }
  PairOverlapTable table;
  for (std::uint32_t i = 0; i < frames.size(); ++i) {
    for (std::uint32_t j = i + 1; j < frames.size(); ++j) {
      const FrameVoxelSet& a = frames.sets[i];
      const FrameVoxelSet& b = frames.sets[j];
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
      if (count > 0) table.add(i, j, count);
    }
  }
  return table;
}

void write_overlap_csv(const std::filesystem::path& path, const FrameVoxelSets& frames,
                       const PairOverlapTable& table) {
  std::ofstream out(path);
  if (!out) {
    throw InputError("write_overlap_csv: cannot open " + path.string() + " for writing");
  }
  out << "i,j,intersection,size_i,size_j,iou\n";
  char line[160];
  for (const auto& entry : table.sorted_entries()) {
    const std::uint32_t size_i = static_cast<std::uint32_t>(frames.sets[entry.i].size());
    const std::uint32_t size_j = static_cast<std::uint32_t>(frames.sets[entry.j].size());
    const double iou = iou_overlap(entry.intersection, size_i, size_j);
    std::snprintf(line, sizeof(line), "%d,%d,%u,%u,%u,%.17g\n", frames.frame_ids[entry.i],
                  frames.frame_ids[entry.j], entry.intersection, size_i, size_j, iou);
    out << line;
  }
  if (!out) {
    throw InputError("write_overlap_csv: write failed for " + path.string());
  }
}

}  // namespace vprdb
