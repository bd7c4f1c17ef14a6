#include "vprdb/metrics_eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "vprdb/errors.hpp"
#include "vprdb/parallel.hpp"

namespace vprdb {

DatabaseStats compute_stats(const DatabaseSelection& selection, const FrameVoxelSets& frames,
                            std::size_t sequence_size, std::size_t excluded_frames) {
  DatabaseStats stats;
  stats.sequence_size = sequence_size;
  stats.db_size = selection.db_positions.size();
  stats.excluded_frames = excluded_frames;
  if (stats.db_size == 0) {
    throw InternalError("compute_stats: empty database selection");
  }
  stats.reduction_rate = static_cast<double>(sequence_size) / static_cast<double>(stats.db_size);

  VoxelHashSet map_voxels;
  for (const FrameVoxelSet& set : frames.sets) {
    map_voxels.insert(set.begin(), set.end());
  }
  if (map_voxels.empty()) {
    throw InternalError("compute_stats: the map has no voxels");
  }
  VoxelHashSet db_voxels;
  for (const std::uint32_t pos : selection.db_positions) {
    db_voxels.insert(frames.sets[pos].begin(), frames.sets[pos].end());
  }
  stats.spatial_coverage_percent =
      100.0 * static_cast<double>(db_voxels.size()) / static_cast<double>(map_voxels.size());
  return stats;
}

std::string format_reduction_rate(double rate) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "x%lld", std::llround(rate));
  return buf;
}

bool ground_truth_match(std::uint32_t intersection, std::uint32_t query_size, double gt_threshold) {
  return coverage_overlap(intersection, query_size) > gt_threshold;
}

DescriptorSet load_descriptors(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw InputError("load_descriptors: cannot open " + path.string());
  }
  DescriptorSet set;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream iss(line);
    long long id;
    if (!(iss >> id)) continue;  // blank or comment-only line

    std::vector<double> values;
    double v;
    while (iss >> v) values.push_back(v);
    if (!iss.eof()) {
      throw InputError("load_descriptors: " + path.string() + ":" + std::to_string(line_no) +
                       ": non-numeric token");
    }
    if (values.empty()) {
      throw InputError("load_descriptors: " + path.string() + ":" + std::to_string(line_no) +
                       ": frame " + std::to_string(id) + " has no values");
    }
    for (const double x : values) {
      if (!std::isfinite(x)) {
        throw InputError("load_descriptors: " + path.string() + ":" + std::to_string(line_no) +
                         ": non-finite value for frame " + std::to_string(id));
      }
    }
    if (set.dimension == 0) {
      set.dimension = values.size();
    } else if (values.size() != set.dimension) {
      throw InputError("load_descriptors: " + path.string() + ":" + std::to_string(line_no) +
                       ": frame " + std::to_string(id) + " has " + std::to_string(values.size()) +
                       " values, expected " + std::to_string(set.dimension));
    }

    const double norm = std::sqrt(
        std::inner_product(values.begin(), values.end(), values.begin(), 0.0));
    if (!(norm > 0.0)) {
      throw InputError("load_descriptors: " + path.string() + ":" + std::to_string(line_no) +
                       ": frame " + std::to_string(id) + " has a zero descriptor");
    }
    for (double& x : values) x /= norm;

    if (!set.vectors.emplace(static_cast<int>(id), std::move(values)).second) {
      throw InputError("load_descriptors: " + path.string() + ":" + std::to_string(line_no) +
                       ": duplicate frame id " + std::to_string(id));
    }
  }
  if (set.vectors.empty()) {
    throw InputError("load_descriptors: " + path.string() + " contains no descriptors");
  }
  return set;
}

void save_descriptors(const std::filesystem::path& path, const DescriptorSet& descriptors) {
  std::ofstream out(path);
  if (!out) {
    throw InputError("save_descriptors: cannot open " + path.string() + " for writing");
  }
  std::vector<int> ids;
  ids.reserve(descriptors.vectors.size());
  for (const auto& [id, values] : descriptors.vectors) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  char buf[32];
  for (const int id : ids) {
    out << id;
    for (const double v : descriptors.vectors.at(id)) {
      std::snprintf(buf, sizeof(buf), " %.17g", v);
      out << buf;
    }
    out << '\n';
  }
  if (!out) {
    throw InputError("save_descriptors: write failed for " + path.string());
  }
}

RetrievalResult recall_at_k(const std::vector<int>& db_ids, const std::vector<int>& query_ids,
                            const DescriptorSet& descriptors, int k,
                            const std::function<bool(int, int)>& is_match, int threads) {
  if (k < 1) {
    throw ConfigError("recall_at_k: k must be >= 1, got " + std::to_string(k));
  }
  if (db_ids.empty()) {
    throw InputError("recall_at_k: empty database");
  }
  {
    std::vector<int> sorted_db = db_ids;
    std::sort(sorted_db.begin(), sorted_db.end());
    if (std::adjacent_find(sorted_db.begin(), sorted_db.end()) != sorted_db.end()) {
      throw InputError("recall_at_k: duplicate database frame ids");
    }
  }

  std::vector<const std::vector<double>*> db_vecs;
  db_vecs.reserve(db_ids.size());
  for (const int id : db_ids) {
    const auto it = descriptors.vectors.find(id);
    if (it == descriptors.vectors.end()) {
      throw InputError("recall_at_k: missing descriptor for database frame " + std::to_string(id));
    }
    db_vecs.push_back(&it->second);
  }
  std::vector<const std::vector<double>*> query_vecs;
  query_vecs.reserve(query_ids.size());
  for (const int id : query_ids) {
    const auto it = descriptors.vectors.find(id);
    if (it == descriptors.vectors.end()) {
      throw InputError("recall_at_k: missing descriptor for query frame " + std::to_string(id));
    }
    query_vecs.push_back(&it->second);
  }

  struct QueryOutcome {
    std::vector<RetrievalRow> rows;
    bool has_gt = false;
    bool recalled = false;
  };
  std::vector<QueryOutcome> outcomes(query_ids.size());
  const std::size_t top = std::min(static_cast<std::size_t>(k), db_ids.size());

  parallel_for(query_ids.size(), threads, [&](std::size_t qi) {
    const int query_id = query_ids[qi];
    const std::vector<double>& q = *query_vecs[qi];
    QueryOutcome& outcome = outcomes[qi];

    for (const int db_id : db_ids) {
      if (is_match(query_id, db_id)) {
        outcome.has_gt = true;
        break;
      }
    }

    std::vector<std::size_t> order(db_ids.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> sims(db_ids.size());
    for (std::size_t d = 0; d < db_ids.size(); ++d) {
      sims[d] = std::inner_product(q.begin(), q.end(), db_vecs[d]->begin(), 0.0);
    }
    // Full ranking with deterministic ties, then keep the head. Partial sort
    // would do, but database sizes here are small.
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (sims[a] != sims[b]) return sims[a] > sims[b];
      return db_ids[a] < db_ids[b];
    });

    outcome.rows.reserve(top);
    for (std::size_t r = 0; r < top; ++r) {
      const std::size_t d = order[r];
      RetrievalRow row;
      row.query_id = query_id;
      row.rank = static_cast<int>(r + 1);
      row.db_id = db_ids[d];
      row.similarity = sims[d];
      row.correct = is_match(query_id, db_ids[d]);
      outcome.rows.push_back(row);
      if (row.correct) outcome.recalled = true;
    }
  });

  RetrievalResult result;
  result.k = k;
  for (const QueryOutcome& outcome : outcomes) {
    result.rows.insert(result.rows.end(), outcome.rows.begin(), outcome.rows.end());
    if (!outcome.has_gt) {
      ++result.queries_without_gt;
      continue;
    }
    ++result.evaluated_queries;
    if (outcome.recalled) ++result.recalled_queries;
  }
  result.recall = result.evaluated_queries == 0
                      ? 0.0
                      : static_cast<double>(result.recalled_queries) /
                            static_cast<double>(result.evaluated_queries);
  return result;
}

void write_retrieval_csv(const std::filesystem::path& path, const RetrievalResult& result) {
  std::ofstream out(path);
  if (!out) {
    throw InputError("write_retrieval_csv: cannot open " + path.string() + " for writing");
  }
  out << "query_id,rank,db_id,similarity,correct\n";
  char line[96];
  for (const RetrievalRow& row : result.rows) {
    std::snprintf(line, sizeof(line), "%d,%d,%d,%.17g,%d\n", row.query_id, row.rank, row.db_id,
                  row.similarity, row.correct ? 1 : 0);
    out << line;
  }
  if (!out) {
    throw InputError("write_retrieval_csv: write failed for " + path.string());
  }
}

FinetuneSplit export_finetune_split(const FrameVoxelSets& frames, const ClassAssignment& classes,
                                    const ScanSequence& sequence) {
  if (classes.class_of.size() != frames.size()) {
    throw InternalError("export_finetune_split: class assignment does not cover all frames");
  }
  FinetuneSplit split;
  for (std::size_t pos = 0; pos < frames.size(); ++pos) {
    FinetuneEntry entry;
    entry.frame_id = frames.frame_ids[pos];
    entry.class_db_id = frames.frame_ids[classes.class_of[pos]];
    const auto fid = static_cast<std::size_t>(entry.frame_id);
    if (fid < sequence.frames.size()) {
      entry.color_path = sequence.frames[fid].color_path.string();
    }
    (entry.frame_id % 5 == 0 ? split.validation : split.train).push_back(entry);
  }
  return split;
}

void write_finetune_manifest(const std::filesystem::path& path,
                             const std::vector<FinetuneEntry>& entries) {
  std::ofstream out(path);
  if (!out) {
    throw InputError("write_finetune_manifest: cannot open " + path.string() + " for writing");
  }
  out << "frame_id,class_db_id,color_path\n";
  for (const FinetuneEntry& entry : entries) {
    out << entry.frame_id << ',' << entry.class_db_id << ',' << entry.color_path << '\n';
  }
  if (!out) {
    throw InputError("write_finetune_manifest: write failed for " + path.string());
  }
}

}  // namespace vprdb
