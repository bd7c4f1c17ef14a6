#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "vprdb/geometry.hpp"
#include "vprdb/overlap.hpp"

namespace vprdb {

/// One frame of a scanning sequence. color_path may be empty; depth_path is
/// empty only when the loader was asked to keep frames with missing depth.
struct FrameRecord {
  int id = 0;
  double timestamp = 0.0;
  std::filesystem::path color_path;
  std::filesystem::path depth_path;
  PoseSE3 pose;
};

struct ScanSequence {
  std::vector<FrameRecord> frames;
  CameraIntrinsics intrinsics;

  std::size_t size() const { return frames.size(); }
};

struct LoadOptions {
  double max_dt = 0.02;  // timestamp association tolerance, seconds
  bool keep_missing_depth = false;
};

struct TrajectoryEntry {
  double timestamp = 0.0;
  PoseSE3 pose;
};

/// Parses "timestamp tx ty tz qx qy qz qw" lines; '#' starts a comment.
/// Throws InputError with the line number on malformed lines or quaternions
/// whose norm is off by more than 1e-3 (smaller deviations are renormalized).
std::vector<TrajectoryEntry> parse_trajectory(const std::filesystem::path& path);

CameraIntrinsics read_intrinsics(const std::filesystem::path& path);
void write_intrinsics(const std::filesystem::path& path, const CameraIntrinsics& intrinsics);

DepthImage read_depth_png(const std::filesystem::path& path);
void write_depth_png(const std::filesystem::path& path, const DepthImage& image);

/// Greedy nearest-timestamp pairing of two sorted streams. Each index is used
/// at most once, pairs with |dt| > max_dt are dropped, and matched indices
/// strictly increase in both streams.
std::vector<std::pair<std::size_t, std::size_t>> associate_streams(
    const std::vector<double>& left_ts, const std::vector<double>& right_ts, double max_dt);

/// Loads a sequence from `root`, which must contain trajectory.txt,
/// intrinsics.txt and a depth/ directory. Depth files are matched to
/// trajectory entries through associations.txt ("frame_id depth_file
/// [color_file]" lines) when present, otherwise by filename timestamp.
/// Frames without a depth match are dropped (counted in *dropped_frames)
/// unless options.keep_missing_depth is set. Surviving frames are renumbered
/// 0..N-1 in timestamp order.
ScanSequence load_sequence(const std::filesystem::path& root, const LoadOptions& options = {},
                           std::size_t* dropped_frames = nullptr);

struct SyntheticSceneSpec {
  std::string kind = "corridor";  // "corridor" or "grid-room"
  int frame_count = 10;
  double step = 0.6;       // camera advance per frame, meters (corridor)
  int view_extent = 8;     // voxels visible per frame along the corridor, or
                           // side length of the wall window (grid-room)
  double voxel_size = 0.3;
  std::uint64_t seed = 0;
};

/// A generated scene plus the voxel sets each frame provably produces when
/// back-projected at the scene's voxel size (any stride in {1,2,4}).
struct SyntheticScene {
  ScanSequence sequence;  // depth paths empty until write_scene fills them
  std::vector<DepthImage> depth_images;
  FrameVoxelSets expected;
  double voxel_size = 0.0;
};

/// Builds a scene with closed-form per-frame voxel sets.
///
/// corridor: frame k sits at z = k*step looking down +z and sees exactly the
/// voxels {k*s .. k*s + view_extent - 1} on the z axis, s = step/voxel_size
/// (must be a positive integer). Consecutive frames overlap in
/// view_extent - s voxels.
///
/// grid-room: every frame faces a wall and sees a view_extent^2 window of
/// wall voxels at a seed-determined lattice offset in [0, 2*view_extent)^2,
/// so pairwise intersections are rectangle overlaps.
SyntheticScene generate_synthetic_scene(const SyntheticSceneSpec& spec);

/// Writes trajectory.txt, intrinsics.txt, associations.txt and depth/ PNGs
/// under root, updating the scene's frame depth paths in place.
void write_scene(SyntheticScene& scene, const std::filesystem::path& root);

}  // namespace vprdb
