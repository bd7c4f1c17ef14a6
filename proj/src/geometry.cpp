#include "vprdb/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "vprdb/errors.hpp"

namespace vprdb {

void validate(const CameraIntrinsics& intrinsics) {
  if (!(intrinsics.fx > 0.0) || !(intrinsics.fy > 0.0)) {
    throw InputError("intrinsics: focal lengths must be positive, got fx=" +
                     std::to_string(intrinsics.fx) + " fy=" + std::to_string(intrinsics.fy));
  }
  if (intrinsics.width <= 0 || intrinsics.height <= 0) {
    throw InputError("intrinsics: image size must be positive, got " +
                     std::to_string(intrinsics.width) + "x" + std::to_string(intrinsics.height));
  }
  if (!(intrinsics.cx > 0.0) || intrinsics.cx >= intrinsics.width ||
      !(intrinsics.cy > 0.0) || intrinsics.cy >= intrinsics.height) {
    throw InputError("intrinsics: principal point must lie inside the image");
  }
  if (!(intrinsics.depth_scale > 0.0)) {
    throw InputError("intrinsics: depth_scale must be positive, got " +
                     std::to_string(intrinsics.depth_scale));
  }
}

VoxelKey voxel_of(const Eigen::Vector3d& point, double voxel_size) {
  return VoxelKey{static_cast<std::int32_t>(std::floor(point.x() / voxel_size)),
                  static_cast<std::int32_t>(std::floor(point.y() / voxel_size)),
                  static_cast<std::int32_t>(std::floor(point.z() / voxel_size))};
}

DepthImage DepthImage::zeros(int width, int height) {
  DepthImage image;
  image.width = width;
  image.height = height;
  image.values.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0);
  return image;
}

Eigen::Vector3d backproject_pixel(double u, double v, double z, const CameraIntrinsics& intrinsics) {
  if (!(z > 0.0)) {
    throw InternalError("backproject_pixel: depth must be positive, got " + std::to_string(z));
  }
  return {(u - intrinsics.cx) * z / intrinsics.fx, (v - intrinsics.cy) * z / intrinsics.fy, z};
}

std::vector<Eigen::Vector3d> frame_to_world_points(const DepthImage& depth,
                                                   const CameraIntrinsics& intrinsics,
                                                   const PoseSE3& pose, int stride,
                                                   double max_depth) {
  if (stride < 1) {
    throw ConfigError("frame_to_world_points: stride must be >= 1, got " + std::to_string(stride));
  }
  if (!(max_depth > 0.0)) {
    throw ConfigError("frame_to_world_points: max_depth must be positive, got " +
                      std::to_string(max_depth));
  }
  if (depth.width != intrinsics.width || depth.height != intrinsics.height) {
    throw InputError("frame_to_world_points: depth image is " + std::to_string(depth.width) + "x" +
                     std::to_string(depth.height) + " but intrinsics expect " +
                     std::to_string(intrinsics.width) + "x" + std::to_string(intrinsics.height));
  }

  std::vector<Eigen::Vector3d> points;
  for (int v = 0; v < depth.height; v += stride) {
    for (int u = 0; u < depth.width; u += stride) {
      const std::uint16_t raw = depth.at(u, v);
      if (raw == 0) continue;
      const double z = raw * intrinsics.depth_scale;
      if (z > max_depth) continue;
      points.push_back(pose.apply(backproject_pixel(u, v, z, intrinsics)));
    }
  }
  return points;
}

FrameVoxelSet voxelize(std::span<const Eigen::Vector3d> points, double voxel_size) {
  if (!(voxel_size > 0.0)) {
    throw ConfigError("voxelize: voxel_size must be positive, got " + std::to_string(voxel_size));
  }
  FrameVoxelSet voxels;
  voxels.reserve(points.size());
  for (const auto& point : points) {
    voxels.push_back(voxel_of(point, voxel_size));
  }
  std::sort(voxels.begin(), voxels.end());
  voxels.erase(std::unique(voxels.begin(), voxels.end()), voxels.end());
  return voxels;
}

DepthImage synthesize_depth_from_map(const VoxelHashSet& map_voxels, double voxel_size,
                                     const PoseSE3& pose, const CameraIntrinsics& intrinsics,
                                     const DepthImage* existing) {
  if (map_voxels.empty()) {
    throw InputError("synthesize_depth_from_map: voxel map is empty");
  }
  if (existing != nullptr &&
      (existing->width != intrinsics.width || existing->height != intrinsics.height)) {
    throw InputError("synthesize_depth_from_map: existing image size mismatch");
  }

  const int width = intrinsics.width;
  const int height = intrinsics.height;
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // Pass 1: project voxel centers, keep the nearest hit per pixel.
  std::vector<double> zbuf(static_cast<std::size_t>(width) * height, kInf);
  auto z_at = [&](int u, int v) -> double& {
    return zbuf[static_cast<std::size_t>(v) * width + u];
  };
  for (const VoxelKey& key : map_voxels) {
    const Eigen::Vector3d center{(key.x + 0.5) * voxel_size, (key.y + 0.5) * voxel_size,
                                 (key.z + 0.5) * voxel_size};
    const Eigen::Vector3d in_cam = pose.apply_inverse(center);
    if (!(in_cam.z() > 0.0)) continue;
    const double u = intrinsics.fx * in_cam.x() / in_cam.z() + intrinsics.cx;
    const double v = intrinsics.fy * in_cam.y() / in_cam.z() + intrinsics.cy;
    const int ui = static_cast<int>(std::lround(u));
    const int vi = static_cast<int>(std::lround(v));
    if (ui < 0 || ui >= width || vi < 0 || vi >= height) continue;
    double& slot = z_at(ui, vi);
    slot = std::min(slot, in_cam.z());
  }

  // Pass 2: dilate each splat to the voxel's pixel footprint at its depth so
  // nearby voxels form a contiguous surface. Nearest value still wins.
  std::vector<double> dilated = zbuf;
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      const double z = z_at(u, v);
      if (z == kInf) continue;
      const int radius = static_cast<int>(std::ceil(intrinsics.fx * voxel_size / (2.0 * z)));
      const int u0 = std::max(0, u - radius);
      const int u1 = std::min(width - 1, u + radius);
      const int v0 = std::max(0, v - radius);
      const int v1 = std::min(height - 1, v + radius);
      for (int vv = v0; vv <= v1; ++vv) {
        for (int uu = u0; uu <= u1; ++uu) {
          double& slot = dilated[static_cast<std::size_t>(vv) * width + uu];
          slot = std::min(slot, z);
        }
      }
    }
  }

  // Pass 3: convert to raw units; measured pixels take precedence.
  DepthImage out = DepthImage::zeros(width, height);
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      if (existing != nullptr && existing->at(u, v) != 0) {
        out.at(u, v) = existing->at(u, v);
        continue;
      }
      const double z = dilated[static_cast<std::size_t>(v) * width + u];
      if (z == kInf) continue;
      const double raw = std::round(z / intrinsics.depth_scale);
      if (raw < 1.0 || raw > 65535.0) continue;
      out.at(u, v) = static_cast<std::uint16_t>(raw);
    }
  }
  return out;
}

}  // namespace vprdb
