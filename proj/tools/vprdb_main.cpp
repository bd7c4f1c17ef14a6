#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <filesystem>
#include <vector>

#include "vprdb/errors.hpp"
#include "vprdb/pipeline.hpp"

namespace {

void add_voxelize_options(CLI::App* cmd, vprdb::PipelineConfig& config) {
  cmd->add_option("--voxel-size", config.voxel_size, "Voxel edge length in meters")
      ->capture_default_str();
  cmd->add_option("--stride", config.stride, "Sample every Nth pixel when back-projecting")
      ->capture_default_str();
  cmd->add_option("--max-depth", config.max_depth, "Ignore depth beyond this range in meters")
      ->capture_default_str();
  cmd->add_option("--threads", config.threads, "Worker threads (0 = all cores)")
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compresses an RGBD scanning sequence into a minimal place-recognition database"};
  app.set_config("--config", "", "Read options from a key=value file");
  app.require_subcommand(1);

  vprdb::PipelineConfig config;
  std::vector<double> sweep_thresholds{0.1, 0.3, 0.5};
  vprdb::SyntheticSceneSpec scene_spec;
  std::filesystem::path synth_out;

  CLI::App* build = app.add_subcommand("build", "Select a database from a scan");
  build->add_option("--in", config.input_root, "Scan directory")->required();
  build->add_option("--out", config.out_dir, "Output directory")->required();
  build->add_option("--threshold", config.threshold, "Overlap threshold mu in (0,1)")
      ->capture_default_str();
  build->add_option("--selector", config.selector, "Dominating-set solver: greedy or exact")
      ->capture_default_str();
  build->add_option("--exact-limit", config.exact_limit, "Max vertices for the exact solver")
      ->capture_default_str();
  build->add_flag("--dump-overlap", config.dump_overlap, "Also write overlap.csv");
  add_voxelize_options(build, config);

  CLI::App* sweep = app.add_subcommand("sweep", "Build at several overlap thresholds");
  sweep->add_option("--in", config.input_root, "Scan directory")->required();
  sweep->add_option("--out", config.out_dir, "Output directory")->required();
  sweep->add_option("--threshold", sweep_thresholds, "Thresholds to sweep")
      ->capture_default_str();
  sweep->add_option("--selector", config.selector, "Dominating-set solver: greedy or exact")
      ->capture_default_str();
  sweep->add_option("--exact-limit", config.exact_limit, "Max vertices for the exact solver")
      ->capture_default_str();
  sweep->add_flag("--dump-overlap", config.dump_overlap, "Also write overlap.csv");
  add_voxelize_options(sweep, config);

  CLI::App* eval = app.add_subcommand("eval", "Score retrieval against spatial ground truth");
  eval->add_option("--in", config.input_root, "Scan directory the database was built from")
      ->required();
  eval->add_option("--out", config.out_dir, "Output directory")->required();
  eval->add_option("--db", config.db_manifest, "database.txt from a build")->required();
  eval->add_option("--db-descriptors", config.db_descriptors,
                   "Descriptor file for scan frames")
      ->required();
  eval->add_option("--query-descriptors", config.query_descriptors,
                   "Descriptor file for query frames (default: --db-descriptors)");
  eval->add_option("--query-root", config.query_root,
                   "Query sequence directory (default: --in)");
  eval->add_option("--k", config.k, "Report recall at this rank")->capture_default_str();
  eval->add_option("--gt-threshold", config.gt_threshold,
                   "Query-coverage fraction that counts as the same place")
      ->capture_default_str();
  add_voxelize_options(eval, config);

  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic scene with known overlaps");
  synth->add_option("--out", synth_out, "Scene directory to create")->required();
  synth->add_option("--kind", scene_spec.kind, "corridor or grid-room")->capture_default_str();
  synth->add_option("--frames", scene_spec.frame_count, "Number of frames")
      ->capture_default_str();
  synth->add_option("--step", scene_spec.step, "Camera advance per frame in meters (corridor)")
      ->capture_default_str();
  synth->add_option("--view-extent", scene_spec.view_extent, "Voxels visible per frame")
      ->capture_default_str();
  synth->add_option("--voxel-size", scene_spec.voxel_size, "Voxel edge length in meters")
      ->capture_default_str();
  synth->add_option("--seed", scene_spec.seed, "Random seed (grid-room placement)")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // bad arguments are configuration errors
  }

  try {
    if (build->parsed()) {
      vprdb::run_build(config);
    } else if (sweep->parsed()) {
      vprdb::run_sweep(config, sweep_thresholds);
    } else if (eval->parsed()) {
      vprdb::run_eval(config);
    } else if (synth->parsed()) {
      vprdb::run_synth(scene_spec, synth_out);
    }
  } catch (const vprdb::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const vprdb::InputError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return 2;
  } catch (const vprdb::InternalError& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 3;
  }
  return 0;
}
