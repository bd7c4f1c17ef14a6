#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <compare>
#include <cstdint>
#include <span>
#include <unordered_set>
#include <vector>

namespace vprdb {

/// Pinhole camera model plus the scale converting raw depth units to meters.
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;
  double depth_scale = 0.001;  // meters per raw depth unit
};

/// Throws InputError if the intrinsics violate their invariants.
void validate(const CameraIntrinsics& intrinsics);

/// Camera-to-world rigid transform: point_world = rotation * point_camera + translation.
struct PoseSE3 {
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d apply(const Eigen::Vector3d& point_camera) const {
    return rotation * point_camera + translation;
  }
  Eigen::Vector3d apply_inverse(const Eigen::Vector3d& point_world) const {
    return rotation.conjugate() * (point_world - translation);
  }
};

/// Integer cell coordinates of an axis-aligned cube of side voxel_size.
/// A point maps to floor(coordinate / voxel_size) componentwise, so any two
/// points inside the same cube produce equal keys, negatives included.
struct VoxelKey {
  std::int32_t x = 0;
  std::int32_t y = 0;
  std::int32_t z = 0;
  friend auto operator<=>(const VoxelKey&, const VoxelKey&) = default;
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& key) const noexcept {
    return (static_cast<std::uint32_t>(key.x) * 73856093u) ^
           (static_cast<std::uint32_t>(key.y) * 19349669u) ^
           (static_cast<std::uint32_t>(key.z) * 83492791u);
  }
};

VoxelKey voxel_of(const Eigen::Vector3d& point, double voxel_size);

/// Voxels observed by one frame, sorted and deduplicated.
using FrameVoxelSet = std::vector<VoxelKey>;
using VoxelHashSet = std::unordered_set<VoxelKey, VoxelKeyHash>;

/// Raw sensor depth, row-major; the value 0 marks an invalid pixel.
struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> values;

  static DepthImage zeros(int width, int height);

  std::uint16_t at(int u, int v) const {
    return values[static_cast<std::size_t>(v) * static_cast<std::size_t>(width) + static_cast<std::size_t>(u)];
  }
  std::uint16_t& at(int u, int v) {
    return values[static_cast<std::size_t>(v) * static_cast<std::size_t>(width) + static_cast<std::size_t>(u)];
  }
};

/// Inverse pinhole projection of pixel (u, v) at metric depth z, camera frame.
Eigen::Vector3d backproject_pixel(double u, double v, double z, const CameraIntrinsics& intrinsics);

/// Back-projects every stride-th valid pixel with depth in (0, max_depth] and
/// transforms the points into the world frame.
std::vector<Eigen::Vector3d> frame_to_world_points(const DepthImage& depth,
                                                   const CameraIntrinsics& intrinsics,
                                                   const PoseSE3& pose, int stride,
                                                   double max_depth);

/// Maps points to their voxel keys, sorted with duplicates removed.
FrameVoxelSet voxelize(std::span<const Eigen::Vector3d> points, double voxel_size);

/// Renders a depth image for the given camera from a global voxel map.
///
/// Voxel centers are projected with z-buffering (nearest wins) and each splat
/// is dilated by a square kernel sized to the voxel footprint at its depth.
/// Pixels that are valid in `existing` keep their original value; pixels hit
/// by no voxel remain 0.
DepthImage synthesize_depth_from_map(const VoxelHashSet& map_voxels, double voxel_size,
                                     const PoseSE3& pose, const CameraIntrinsics& intrinsics,
                                     const DepthImage* existing = nullptr);

}  // namespace vprdb
