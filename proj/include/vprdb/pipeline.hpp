#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vprdb/graph_select.hpp"
#include "vprdb/metrics_eval.hpp"
#include "vprdb/overlap.hpp"
#include "vprdb/sequence_io.hpp"

namespace vprdb {

struct PipelineConfig {
  std::filesystem::path input_root;
  std::filesystem::path out_dir;
  double voxel_size = 0.3;
  double threshold = 0.3;  // graph edge threshold mu
  int stride = 4;
  double max_depth = 10.0;
  std::string selector = "greedy";
  std::size_t exact_limit = 20;
  int threads = 0;  // 0 = hardware concurrency
  bool dump_overlap = false;

  // eval only
  std::filesystem::path db_manifest;
  std::filesystem::path db_descriptors;
  std::filesystem::path query_descriptors;  // defaults to db_descriptors
  std::filesystem::path query_root;         // defaults to input_root
  int k = 1;
  double gt_threshold = 0.3;
};

/// Checks the numeric ranges shared by all commands. Throws ConfigError.
void validate_config(const PipelineConfig& config);

/// Frame voxel sets for the frames of one sequence that produced at least one
/// voxel; the rest are counted as excluded.
struct VoxelizedSequence {
  FrameVoxelSets sets;
  std::size_t excluded = 0;
  std::size_t loaded = 0;  // frames in the sequence before exclusion
};

VoxelizedSequence voxelize_sequence(const ScanSequence& sequence, const PipelineConfig& config);

struct BuildResult {
  DatabaseSelection selection;
  DatabaseStats stats;
};

/// Full build: load, voxelize, overlap, select, classify; writes
/// database.txt, classes.csv, stats.json, train.csv, validation.csv and
/// optionally overlap.csv under out_dir.
BuildResult run_build(const PipelineConfig& config);

/// Like run_build but reuses one overlap table across all thresholds, writing
/// per-threshold outputs under out_dir/mu_<t>/ plus a combined sweep.json.
/// Duplicate thresholds are dropped with a warning.
std::vector<BuildResult> run_sweep(const PipelineConfig& config, std::vector<double> thresholds);

/// Retrieval evaluation of a built database against a query sequence; writes
/// retrieval.csv and recall_summary.json under out_dir.
RetrievalResult run_eval(const PipelineConfig& config);

/// Generates a synthetic scene directory that the other commands can consume.
void run_synth(const SyntheticSceneSpec& spec, const std::filesystem::path& out_root);

}  // namespace vprdb
