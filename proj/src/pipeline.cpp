#include "vprdb/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <string>
#include <unordered_set>

#include "vprdb/errors.hpp"
#include "vprdb/parallel.hpp"

namespace vprdb {

namespace {

using ordered_json = nlohmann::ordered_json;

void write_json(const std::filesystem::path& path, const ordered_json& value) {
  std::ofstream out(path);
  if (!out) {
    throw InputError("cannot open " + path.string() + " for writing");
  }
  out << value.dump(2) << '\n';
  if (!out) {
    throw InputError("write failed for " + path.string());
  }
}

ordered_json stats_to_json(const DatabaseStats& stats, std::size_t queries_without_gt) {
  ordered_json j;
  j["sequence_size"] = stats.sequence_size;
  j["db_size"] = stats.db_size;
  j["reduction_rate"] = format_reduction_rate(stats.reduction_rate);
  j["spatial_coverage_percent"] = stats.spatial_coverage_percent;
  j["excluded_frames"] = stats.excluded_frames;
  j["queries_without_gt"] = queries_without_gt;
  return j;
}

void log_stats(const char* tag, const DatabaseStats& stats) {
  std::printf("%s: db size %zu, reduction rate %s, spatial coverage %.1f%%\n", tag, stats.db_size,
              format_reduction_rate(stats.reduction_rate).c_str(),
              stats.spatial_coverage_percent);
}

DatabaseSelection select_database(const OverlapGraph& graph, const PipelineConfig& config) {
  if (config.selector == "greedy") return greedy_dominating_set(graph);
  return exact_dominating_set(graph, config.exact_limit);
}

/// Writes everything a single-threshold selection produces.
BuildResult emit_selection(const std::filesystem::path& dir, const VoxelizedSequence& voxelized,
                           const ScanSequence& sequence, const OverlapGraph& graph,
                           const PipelineConfig& config) {
  std::filesystem::create_directories(dir);
  BuildResult result;
  result.selection = select_database(graph, config);
  const ClassAssignment classes = assign_classes(result.selection, graph);
  result.stats =
      compute_stats(result.selection, voxelized.sets, voxelized.loaded, voxelized.excluded);

  write_database_manifest(dir / "database.txt", voxelized.sets, result.selection);
  write_class_csv(dir / "classes.csv", voxelized.sets, classes);
  write_json(dir / "stats.json", stats_to_json(result.stats, 0));

  const FinetuneSplit split = export_finetune_split(voxelized.sets, classes, sequence);
  write_finetune_manifest(dir / "train.csv", split.train);
  write_finetune_manifest(dir / "validation.csv", split.validation);
  return result;
}

}  // namespace

void validate_config(const PipelineConfig& config) {
  if (!(config.voxel_size > 0.0)) {
    throw ConfigError("voxel-size must be positive, got " + std::to_string(config.voxel_size));
  }
  if (!(config.threshold > 0.0) || !(config.threshold < 1.0)) {
    throw ConfigError("threshold must be in (0,1), got " + std::to_string(config.threshold));
  }
  if (config.stride < 1) {
    throw ConfigError("stride must be >= 1, got " + std::to_string(config.stride));
  }
  if (!(config.max_depth > 0.0)) {
    throw ConfigError("max-depth must be positive, got " + std::to_string(config.max_depth));
  }
  if (config.selector != "greedy" && config.selector != "exact") {
    throw ConfigError("selector must be greedy or exact, got '" + config.selector + "'");
  }
  if (config.exact_limit < 1) {
    throw ConfigError("exact-limit must be >= 1");
  }
  if (config.threads < 0) {
    throw ConfigError("threads must be >= 0, got " + std::to_string(config.threads));
  }
  if (config.k < 1) {
    throw ConfigError("k must be >= 1, got " + std::to_string(config.k));
  }
  if (!(config.gt_threshold > 0.0) || !(config.gt_threshold < 1.0)) {
    throw ConfigError("gt-threshold must be in (0,1), got " + std::to_string(config.gt_threshold));
  }
}

VoxelizedSequence voxelize_sequence(const ScanSequence& sequence, const PipelineConfig& config) {
  std::vector<FrameVoxelSet> per_frame(sequence.size());
  parallel_for(sequence.size(), config.threads, [&](std::size_t i) {
    const FrameRecord& frame = sequence.frames[i];
    if (frame.depth_path.empty()) return;  // kept without depth: stays empty
    const DepthImage depth = read_depth_png(frame.depth_path);
    const std::vector<Eigen::Vector3d> points =
        frame_to_world_points(depth, sequence.intrinsics, frame.pose, config.stride,
                              config.max_depth);
    per_frame[i] = voxelize(points, config.voxel_size);
  });

  VoxelizedSequence voxelized;
  voxelized.loaded = sequence.size();
  for (std::size_t i = 0; i < sequence.size(); ++i) {
    if (per_frame[i].empty()) {
      ++voxelized.excluded;
      continue;
    }
    voxelized.sets.frame_ids.push_back(sequence.frames[i].id);
    voxelized.sets.sets.push_back(std::move(per_frame[i]));
  }
  if (voxelized.excluded > 0) {
    std::fprintf(stderr, "warning: %zu of %zu frames produced no voxels and were excluded\n",
                 voxelized.excluded, voxelized.loaded);
  }
  return voxelized;
}

BuildResult run_build(const PipelineConfig& config) {
  validate_config(config);
  const ScanSequence sequence = load_sequence(config.input_root);
  const VoxelizedSequence voxelized = voxelize_sequence(sequence, config);

  const InvertedVoxelIndex index = build_inverted_index(voxelized.sets);
  const PairOverlapTable table = count_pair_intersections(index, config.threads);
  std::filesystem::create_directories(config.out_dir);
  if (config.dump_overlap) {
    write_overlap_csv(config.out_dir / "overlap.csv", voxelized.sets, table);
  }

  const OverlapGraph graph = build_graph(index.frame_sizes, table, config.threshold);
  BuildResult result = emit_selection(config.out_dir, voxelized, sequence, graph, config);
  log_stats("build", result.stats);
  return result;
}

std::vector<BuildResult> run_sweep(const PipelineConfig& config, std::vector<double> thresholds) {
  validate_config(config);
  if (thresholds.empty()) {
    throw ConfigError("sweep needs at least one threshold");
  }
  std::vector<double> unique;
  for (const double t : thresholds) {
    if (std::find(unique.begin(), unique.end(), t) != unique.end()) {
      std::fprintf(stderr, "warning: duplicate threshold %g dropped\n", t);
      continue;
    }
    if (!(t > 0.0) || !(t < 1.0)) {
      throw ConfigError("threshold must be in (0,1), got " + std::to_string(t));
    }
    unique.push_back(t);
  }

  const ScanSequence sequence = load_sequence(config.input_root);
  const VoxelizedSequence voxelized = voxelize_sequence(sequence, config);

  // One overlap table serves every threshold; only the graph changes.
  const InvertedVoxelIndex index = build_inverted_index(voxelized.sets);
  const PairOverlapTable table = count_pair_intersections(index, config.threads);
  std::filesystem::create_directories(config.out_dir);
  if (config.dump_overlap) {
    write_overlap_csv(config.out_dir / "overlap.csv", voxelized.sets, table);
  }

  std::vector<BuildResult> results;
  ordered_json rows = ordered_json::array();
  for (const double t : unique) {
    PipelineConfig per_threshold = config;
    per_threshold.threshold = t;
    const OverlapGraph graph = build_graph(index.frame_sizes, table, t);

    char name[32];
    std::snprintf(name, sizeof(name), "mu_%g", t);
    BuildResult result =
        emit_selection(config.out_dir / name, voxelized, sequence, graph, per_threshold);

    char tag[48];
    std::snprintf(tag, sizeof(tag), "sweep mu=%g", t);
    log_stats(tag, result.stats);

    ordered_json row = stats_to_json(result.stats, 0);
    ordered_json entry;
    entry["threshold"] = t;
    entry.update(row);
    rows.push_back(entry);
    results.push_back(std::move(result));
  }
  write_json(config.out_dir / "sweep.json", rows);
  return results;
}

namespace {

std::vector<int> read_manifest_ids(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw InputError("cannot open database manifest " + path.string());
  }
  std::vector<int> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      ids.push_back(std::stoi(line));
    } catch (...) {
      throw InputError("database manifest " + path.string() + ":" + std::to_string(line_no) +
                       ": expected a frame id");
    }
  }
  if (ids.empty()) {
    throw InputError("database manifest " + path.string() + " is empty");
  }
  return ids;
}

}  // namespace

RetrievalResult run_eval(const PipelineConfig& config) {
  validate_config(config);
  if (config.db_manifest.empty() || config.db_descriptors.empty()) {
    throw ConfigError("eval needs --db and --db-descriptors");
  }
  const std::filesystem::path query_root =
      config.query_root.empty() ? config.input_root : config.query_root;
  const std::filesystem::path query_desc_path =
      config.query_descriptors.empty() ? config.db_descriptors : config.query_descriptors;

  const ScanSequence db_sequence = load_sequence(config.input_root);
  const ScanSequence query_sequence = load_sequence(query_root);
  const CameraIntrinsics& a = db_sequence.intrinsics;
  const CameraIntrinsics& b = query_sequence.intrinsics;
  if (a.fx != b.fx || a.fy != b.fy || a.cx != b.cx || a.cy != b.cy || a.width != b.width ||
      a.height != b.height || a.depth_scale != b.depth_scale) {
    std::fprintf(stderr,
                 "warning: query sequence intrinsics differ from the scan's; ground truth "
                 "assumes both share one world frame\n");
  }

  const VoxelizedSequence db_voxelized = voxelize_sequence(db_sequence, config);
  const VoxelizedSequence query_voxelized = voxelize_sequence(query_sequence, config);
  if (query_voxelized.sets.size() == 0) {
    throw InputError("no queries: the query sequence produced no usable frames");
  }

  const std::vector<int> manifest_ids = read_manifest_ids(config.db_manifest);

  // Internal id space: database frames take positions 0..B-1, query frames
  // B..B+Q-1, so one overlap table covers every (query, db) pair even when
  // the two sequences share external frame ids.
  FrameVoxelSets combined;
  for (const int id : manifest_ids) {
    const auto it = std::find(db_voxelized.sets.frame_ids.begin(),
                              db_voxelized.sets.frame_ids.end(), id);
    if (it == db_voxelized.sets.frame_ids.end()) {
      throw InputError("database frame " + std::to_string(id) +
                       " from the manifest has no usable voxels in the scan");
    }
    const std::size_t pos =
        static_cast<std::size_t>(it - db_voxelized.sets.frame_ids.begin());
    combined.frame_ids.push_back(static_cast<int>(combined.size()));
    combined.sets.push_back(db_voxelized.sets.sets[pos]);
  }
  const std::size_t db_count = combined.size();
  for (std::size_t q = 0; q < query_voxelized.sets.size(); ++q) {
    combined.frame_ids.push_back(static_cast<int>(combined.size()));
    combined.sets.push_back(query_voxelized.sets.sets[q]);
  }

  const InvertedVoxelIndex index = build_inverted_index(combined);
  const PairOverlapTable table = count_pair_intersections(index, config.threads);

  // Merge both descriptor files under the internal ids.
  const DescriptorSet db_desc = load_descriptors(config.db_descriptors);
  const DescriptorSet query_desc = load_descriptors(query_desc_path);
  if (db_desc.dimension != query_desc.dimension) {
    throw InputError("descriptor dimension mismatch: database " +
                     std::to_string(db_desc.dimension) + ", queries " +
                     std::to_string(query_desc.dimension));
  }
  DescriptorSet merged;
  merged.dimension = db_desc.dimension;
  std::vector<int> internal_db_ids;
  std::vector<int> internal_query_ids;
  for (std::size_t d = 0; d < manifest_ids.size(); ++d) {
    const auto it = db_desc.vectors.find(manifest_ids[d]);
    if (it == db_desc.vectors.end()) {
      throw InputError("missing descriptor for database frame " +
                       std::to_string(manifest_ids[d]));
    }
    internal_db_ids.push_back(static_cast<int>(d));
    merged.vectors.emplace(static_cast<int>(d), it->second);
  }
  for (std::size_t q = 0; q < query_voxelized.sets.size(); ++q) {
    const int external = query_voxelized.sets.frame_ids[q];
    const auto it = query_desc.vectors.find(external);
    if (it == query_desc.vectors.end()) {
      throw InputError("missing descriptor for query frame " + std::to_string(external));
    }
    const int internal = static_cast<int>(db_count + q);
    internal_query_ids.push_back(internal);
    merged.vectors.emplace(internal, it->second);
  }

  const double gt = config.gt_threshold;
  const auto is_match = [&](int query_internal, int db_internal) {
    const auto qi = static_cast<std::uint32_t>(query_internal);
    const auto di = static_cast<std::uint32_t>(db_internal);
    const std::uint32_t inter = table.intersection(di, qi);
    const auto query_size = static_cast<std::uint32_t>(combined.sets[qi].size());
    return ground_truth_match(inter, query_size, gt);
  };

  RetrievalResult result = recall_at_k(internal_db_ids, internal_query_ids, merged, config.k,
                                       is_match, config.threads);

  // Back to external ids for the on-disk report.
  for (RetrievalRow& row : result.rows) {
    row.db_id = manifest_ids[static_cast<std::size_t>(row.db_id)];
    row.query_id =
        query_voxelized.sets.frame_ids[static_cast<std::size_t>(row.query_id) - db_count];
  }

  std::filesystem::create_directories(config.out_dir);
  write_retrieval_csv(config.out_dir / "retrieval.csv", result);
  ordered_json summary;
  summary["k"] = result.k;
  summary["recall"] = result.recall;
  summary["evaluated_queries"] = result.evaluated_queries;
  summary["recalled_queries"] = result.recalled_queries;
  summary["queries_without_gt"] = result.queries_without_gt;
  summary["db_size"] = manifest_ids.size();
  summary["query_count"] = internal_query_ids.size();
  summary["excluded_query_frames"] = query_voxelized.excluded;
  write_json(config.out_dir / "recall_summary.json", summary);

  std::printf("eval: recall@%d = %.4f over %zu queries (%zu without ground truth)\n", result.k,
              result.recall, result.evaluated_queries, result.queries_without_gt);
  return result;
}

void run_synth(const SyntheticSceneSpec& spec, const std::filesystem::path& out_root) {
  SyntheticScene scene = generate_synthetic_scene(spec);
  write_scene(scene, out_root);
  std::printf("synth: wrote %zu-frame %s scene to %s\n", scene.sequence.size(),
              spec.kind.c_str(), out_root.string().c_str());
}

}  // namespace vprdb
