#include "vprdb/sequence_io.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>

#include "vprdb/errors.hpp"

namespace vprdb {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

/// Strips a trailing '#' comment, then whitespace.
std::string strip_comment(const std::string& line) {
  const std::size_t hash = line.find('#');
  return trim(hash == std::string::npos ? line : line.substr(0, hash));
}

std::optional<double> parse_double(const std::string& token) {
  try {
    std::size_t pos = 0;
    const double value = std::stod(token, &pos);
    while (pos < token.size() && std::isspace(static_cast<unsigned char>(token[pos]))) ++pos;
    if (pos != token.size() || !std::isfinite(value)) return std::nullopt;
    return value;
  } catch (...) {
    return std::nullopt;
  }
}

}  // namespace

std::vector<TrajectoryEntry> parse_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw InputError("parse_trajectory: cannot open " + path.string());
  }
  std::vector<TrajectoryEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = strip_comment(line);
    if (body.empty()) continue;

    std::istringstream iss(body);
    double values[8];
    for (int i = 0; i < 8; ++i) {
      if (!(iss >> values[i]) || !std::isfinite(values[i])) {
        throw InputError("parse_trajectory: " + path.string() + ":" + std::to_string(line_no) +
                         ": expected 8 numbers (timestamp tx ty tz qx qy qz qw)");
      }
    }
    std::string extra;
    if (iss >> extra) {
      throw InputError("parse_trajectory: " + path.string() + ":" + std::to_string(line_no) +
                       ": trailing token '" + extra + "'");
    }

    TrajectoryEntry entry;
    entry.timestamp = values[0];
    entry.pose.translation = {values[1], values[2], values[3]};
    Eigen::Quaterniond q(values[7], values[4], values[5], values[6]);  // file order x y z w
    if (std::abs(q.norm() - 1.0) > 1e-3) {
      throw InputError("parse_trajectory: " + path.string() + ":" + std::to_string(line_no) +
                       ": quaternion norm " + std::to_string(q.norm()) + " is not 1");
    }
    entry.pose.rotation = q.normalized();
    entries.push_back(entry);
  }
  return entries;
}

CameraIntrinsics read_intrinsics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw InputError("read_intrinsics: cannot open " + path.string());
  }
  CameraIntrinsics intr;
  bool seen[6] = {false, false, false, false, false, false};  // fx fy cx cy width height
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = strip_comment(line);
    if (body.empty()) continue;
    const std::size_t eq = body.find('=');
    if (eq == std::string::npos) {
      throw InputError("read_intrinsics: " + path.string() + ":" + std::to_string(line_no) +
                       ": expected key = value");
    }
    const std::string key = trim(body.substr(0, eq));
    const auto value = parse_double(trim(body.substr(eq + 1)));
    if (!value) {
      throw InputError("read_intrinsics: " + path.string() + ":" + std::to_string(line_no) +
                       ": bad numeric value for '" + key + "'");
    }
    if (key == "fx") {
      intr.fx = *value;
      seen[0] = true;
    } else if (key == "fy") {
      intr.fy = *value;
      seen[1] = true;
    } else if (key == "cx") {
      intr.cx = *value;
      seen[2] = true;
    } else if (key == "cy") {
      intr.cy = *value;
      seen[3] = true;
    } else if (key == "width") {
      intr.width = static_cast<int>(*value);
      seen[4] = true;
    } else if (key == "height") {
      intr.height = static_cast<int>(*value);
      seen[5] = true;
    } else if (key == "depth_scale") {
      intr.depth_scale = *value;
    } else {
      throw InputError("read_intrinsics: " + path.string() + ":" + std::to_string(line_no) +
                       ": unknown key '" + key + "'");
    }
  }
  static const char* kNames[6] = {"fx", "fy", "cx", "cy", "width", "height"};
  for (int i = 0; i < 6; ++i) {
    if (!seen[i]) {
      throw InputError("read_intrinsics: " + path.string() + ": missing key '" +
                       std::string(kNames[i]) + "'");
    }
  }
  validate(intr);
  return intr;
}

void write_intrinsics(const std::filesystem::path& path, const CameraIntrinsics& intrinsics) {
  std::ofstream out(path);
  if (!out) {
    throw InputError("write_intrinsics: cannot open " + path.string() + " for writing");
  }
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "fx = %.17g\nfy = %.17g\ncx = %.17g\ncy = %.17g\nwidth = %d\nheight = %d\n"
                "depth_scale = %.17g\n",
                intrinsics.fx, intrinsics.fy, intrinsics.cx, intrinsics.cy, intrinsics.width,
                intrinsics.height, intrinsics.depth_scale);
  out << buf;
  if (!out) {
    throw InputError("write_intrinsics: write failed for " + path.string());
  }
}

DepthImage read_depth_png(const std::filesystem::path& path) {
  const cv::Mat mat = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (mat.empty()) {
    throw InputError("read_depth_png: cannot read " + path.string());
  }
  if (mat.type() != CV_16UC1) {
    throw InputError("read_depth_png: " + path.string() +
                     " is not 16-bit single-channel (type " + std::to_string(mat.type()) + ")");
  }
  DepthImage image = DepthImage::zeros(mat.cols, mat.rows);
  for (int row = 0; row < mat.rows; ++row) {
    const std::uint16_t* src = mat.ptr<std::uint16_t>(row);
    std::copy(src, src + mat.cols, image.values.begin() + static_cast<std::ptrdiff_t>(row) * mat.cols);
  }
  return image;
}

void write_depth_png(const std::filesystem::path& path, const DepthImage& image) {
  const cv::Mat mat(image.height, image.width, CV_16UC1,
                    const_cast<std::uint16_t*>(image.values.data()));
  if (!cv::imwrite(path.string(), mat)) {
    throw InputError("write_depth_png: cannot write " + path.string());
  }
}

std::vector<std::pair<std::size_t, std::size_t>> associate_streams(
    const std::vector<double>& left_ts, const std::vector<double>& right_ts, double max_dt) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::size_t j = 0;
  for (std::size_t i = 0; i < left_ts.size() && j < right_ts.size(); ++i) {
    while (j + 1 < right_ts.size() &&
           std::abs(right_ts[j + 1] - left_ts[i]) < std::abs(right_ts[j] - left_ts[i])) {
      ++j;
    }
    if (std::abs(right_ts[j] - left_ts[i]) <= max_dt) {
      pairs.emplace_back(i, j);
      ++j;
    }
  }
  return pairs;
}

namespace {

struct DepthMatch {
  std::filesystem::path depth;
  std::filesystem::path color;
};

/// associations.txt lines: "frame_id depth_file [color_file]", paths relative
/// to the sequence root, frame_id indexing trajectory entries in timestamp
/// order.
std::vector<std::optional<DepthMatch>> match_by_associations(const std::filesystem::path& root,
                                                             std::size_t frame_count) {
  std::vector<std::optional<DepthMatch>> matches(frame_count);
  const std::filesystem::path assoc_path = root / "associations.txt";
  std::ifstream in(assoc_path);
  if (!in) {
    throw InputError("load_sequence: cannot open " + assoc_path.string());
  }
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = strip_comment(line);
    if (body.empty()) continue;
    std::istringstream iss(body);
    long long id = -1;
    std::string depth_file;
    std::string color_file;
    if (!(iss >> id >> depth_file)) {
      throw InputError("load_sequence: " + assoc_path.string() + ":" + std::to_string(line_no) +
                       ": expected 'frame_id depth_file [color_file]'");
    }
    iss >> color_file;
    if (id < 0 || static_cast<std::size_t>(id) >= frame_count) {
      throw InputError("load_sequence: " + assoc_path.string() + ":" + std::to_string(line_no) +
                       ": frame id " + std::to_string(id) + " outside trajectory (" +
                       std::to_string(frame_count) + " frames)");
    }
    DepthMatch match;
    match.depth = root / depth_file;
    if (!color_file.empty()) match.color = root / color_file;
    matches[static_cast<std::size_t>(id)] = match;
  }
  return matches;
}

/// Depth files named <timestamp>.png under depth/, matched to trajectory
/// timestamps greedily within max_dt.
std::vector<std::optional<DepthMatch>> match_by_timestamp(const std::filesystem::path& root,
                                                          const std::vector<double>& frame_ts,
                                                          double max_dt) {
  const std::filesystem::path depth_dir = root / "depth";
  if (!std::filesystem::is_directory(depth_dir)) {
    throw InputError("load_sequence: missing depth directory " + depth_dir.string());
  }
  std::vector<std::pair<double, std::filesystem::path>> stamped;
  for (const auto& entry : std::filesystem::directory_iterator(depth_dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ts = parse_double(entry.path().stem().string());
    if (!ts) {
      std::fprintf(stderr, "warning: ignoring depth file with non-numeric name: %s\n",
                   entry.path().filename().string().c_str());
      continue;
    }
    stamped.emplace_back(*ts, entry.path());
  }
  std::sort(stamped.begin(), stamped.end());

  std::vector<double> depth_ts;
  depth_ts.reserve(stamped.size());
  for (const auto& [ts, p] : stamped) depth_ts.push_back(ts);

  std::vector<std::optional<DepthMatch>> matches(frame_ts.size());
  for (const auto& [i, j] : associate_streams(frame_ts, depth_ts, max_dt)) {
    DepthMatch match;
    match.depth = stamped[j].second;
    const std::filesystem::path color = root / "color" / stamped[j].second.filename();
    if (std::filesystem::exists(color)) match.color = color;
    matches[i] = match;
  }
  return matches;
}

}  // namespace

ScanSequence load_sequence(const std::filesystem::path& root, const LoadOptions& options,
                           std::size_t* dropped_frames) {
  const std::filesystem::path traj_path = root / "trajectory.txt";
  const std::filesystem::path intr_path = root / "intrinsics.txt";
  if (!std::filesystem::exists(traj_path)) {
    throw InputError("load_sequence: missing " + traj_path.string());
  }
  if (!std::filesystem::exists(intr_path)) {
    throw InputError("load_sequence: missing " + intr_path.string());
  }

  ScanSequence sequence;
  sequence.intrinsics = read_intrinsics(intr_path);
  std::vector<TrajectoryEntry> entries = parse_trajectory(traj_path);
  if (entries.empty()) {
    throw InputError("load_sequence: no frames in " + traj_path.string());
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [](const TrajectoryEntry& a, const TrajectoryEntry& b) {
                     return a.timestamp < b.timestamp;
                   });

  std::vector<std::optional<DepthMatch>> matches;
  if (std::filesystem::exists(root / "associations.txt")) {
    matches = match_by_associations(root, entries.size());
  } else {
    std::vector<double> frame_ts;
    frame_ts.reserve(entries.size());
    for (const auto& entry : entries) frame_ts.push_back(entry.timestamp);
    matches = match_by_timestamp(root, frame_ts, options.max_dt);
  }

  std::size_t dropped = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const bool have_depth = matches[i].has_value() && std::filesystem::exists(matches[i]->depth);
    if (!have_depth && !options.keep_missing_depth) {
      ++dropped;
      continue;
    }
    FrameRecord frame;
    frame.id = static_cast<int>(sequence.frames.size());
    frame.timestamp = entries[i].timestamp;
    frame.pose = entries[i].pose;
    if (have_depth) {
      frame.depth_path = matches[i]->depth;
      frame.color_path = matches[i]->color;
    }
    sequence.frames.push_back(std::move(frame));
  }
  if (dropped > 0) {
    std::fprintf(stderr, "warning: dropped %zu of %zu frames without a matching depth file\n",
                 dropped, entries.size());
  }
  if (dropped_frames != nullptr) *dropped_frames = dropped;
  if (sequence.frames.empty()) {
    throw InputError("load_sequence: no frames with usable depth under " + root.string());
  }
  return sequence;
}

namespace {

CameraIntrinsics synthetic_intrinsics() {
  CameraIntrinsics intr;
  intr.fx = 525.0;
  intr.fy = 525.0;
  intr.cx = 320.0;
  intr.cy = 240.0;
  intr.width = 640;
  intr.height = 480;
  intr.depth_scale = 0.001;
  return intr;
}

void validate_spec_common(const SyntheticSceneSpec& spec) {
  if (spec.frame_count < 1) {
    throw ConfigError("synthetic scene: frame_count must be >= 1, got " +
                      std::to_string(spec.frame_count));
  }
  if (spec.view_extent < 1) {
    throw ConfigError("synthetic scene: view_extent must be >= 1, got " +
                      std::to_string(spec.view_extent));
  }
  if (!(spec.voxel_size > 0.0)) {
    throw ConfigError("synthetic scene: voxel_size must be positive");
  }
}

/// Frame k sits at z = k*s*voxel_size looking down +z. One depth image serves
/// every frame: the visible geometry is identical in the camera frame, only
/// the world-frame window {k*s .. k*s+ve-1} shifts.
SyntheticScene make_corridor(const SyntheticSceneSpec& spec) {
  const CameraIntrinsics intr = synthetic_intrinsics();
  const double vs = spec.voxel_size;
  const int ve = spec.view_extent;

  if (!(spec.step > 0.0)) {
    throw ConfigError("corridor scene: step must be positive, got " + std::to_string(spec.step));
  }
  const long long s = std::llround(spec.step / vs);
  if (s < 1 || std::abs(spec.step - static_cast<double>(s) * vs) > 1e-9) {
    throw ConfigError("corridor scene: step " + std::to_string(spec.step) +
                      " is not a positive integer multiple of voxel_size " + std::to_string(vs));
  }

  // One pixel per visible voxel, laid out on a grid with 4 px spacing starting
  // at the principal point, so strides 1, 2 and 4 all sample every pixel.
  const int grid = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(ve))));
  if ((ve - 0.5) * vs > 9.8) {
    throw ConfigError("corridor scene: view_extent * voxel_size exceeds the 10 m depth range");
  }
  if (4.0 * (grid - 1) * (static_cast<double>(ve) - 0.5) >= intr.fx) {
    throw ConfigError("corridor scene: view_extent too large for one-voxel pixel placement");
  }

  DepthImage depth = DepthImage::zeros(intr.width, intr.height);
  for (int m = 0; m < ve; ++m) {
    const int a = m / grid;
    const int b = m % grid;
    const int u = 320 + 4 * a;
    const int v = 240 + 4 * b;
    const double z = (m + 0.5) * vs;
    const long long raw = std::llround(z / intr.depth_scale);
    if (raw < 1 || raw > 65535) {
      throw ConfigError("corridor scene: depth " + std::to_string(z) +
                        " not representable in 16-bit raw units");
    }
    // Quantized depth must still land in voxel m, with x and y in voxel 0.
    const double zq = static_cast<double>(raw) * intr.depth_scale;
    const double x = (u - intr.cx) * zq / intr.fx;
    const double y = (v - intr.cy) * zq / intr.fy;
    if (static_cast<long long>(std::floor(zq / vs)) != m || std::floor(x / vs) != 0.0 ||
        std::floor(y / vs) != 0.0) {
      throw ConfigError("corridor scene: voxel_size " + std::to_string(vs) +
                        " is incompatible with depth quantization");
    }
    depth.at(u, v) = static_cast<std::uint16_t>(raw);
  }

  SyntheticScene scene;
  scene.voxel_size = vs;
  scene.sequence.intrinsics = intr;
  for (int k = 0; k < spec.frame_count; ++k) {
    FrameRecord frame;
    frame.id = k;
    frame.timestamp = static_cast<double>(k);
    frame.pose.translation = {0.0, 0.0, static_cast<double>(k * s) * vs};
    scene.sequence.frames.push_back(frame);
    scene.depth_images.push_back(depth);

    FrameVoxelSet set;
    set.reserve(static_cast<std::size_t>(ve));
    for (int m = 0; m < ve; ++m) {
      set.push_back(VoxelKey{0, 0, static_cast<std::int32_t>(k * s + m)});
    }
    scene.expected.frame_ids.push_back(k);
    scene.expected.sets.push_back(std::move(set));
  }
  return scene;
}

/// Every frame faces a wall at a fixed distance and sees a ve x ve window of
/// wall voxels; the window's lattice offset is drawn from the seed, so
/// pairwise intersections are axis-aligned rectangle overlaps.
SyntheticScene make_grid_room(const SyntheticSceneSpec& spec) {
  const CameraIntrinsics intr = synthetic_intrinsics();
  const double vs = spec.voxel_size;
  const int ve = spec.view_extent;

  const double margin =
      0.85 * std::min(std::min(intr.cx, intr.width - 1 - intr.cx),
                      std::min(intr.cy, intr.height - 1 - intr.cy));
  const double z_wall = intr.fx * ve * vs / margin;
  if (z_wall > 9.8) {
    throw ConfigError("grid-room scene: view_extent * voxel_size needs a wall beyond the 10 m "
                      "depth range");
  }
  const long long raw = std::llround(z_wall / intr.depth_scale);
  if (raw < 1 || raw > 65535) {
    throw ConfigError("grid-room scene: wall depth not representable in 16-bit raw units");
  }
  const double zq = static_cast<double>(raw) * intr.depth_scale;
  const auto z_index = static_cast<std::int32_t>(std::floor(zq / vs));

  // Pixels per voxel at the wall; pixel centers are aligned to multiples of 4
  // so strides 1, 2 and 4 hit them, which needs >= 8 px per voxel to keep the
  // +-2 px alignment error inside the voxel.
  const double ppv = intr.fx * vs / zq;
  if (ppv < 8.0) {
    throw ConfigError("grid-room scene: view_extent too large, voxels are under 8 px wide");
  }

  DepthImage depth = DepthImage::zeros(intr.width, intr.height);
  std::vector<std::pair<int, int>> window_pixels;
  for (int dx = 0; dx < ve; ++dx) {
    for (int dy = 0; dy < ve; ++dy) {
      const int u = 320 + 4 * static_cast<int>(std::lround((dx + 0.5) * ppv / 4.0));
      const int v = 240 + 4 * static_cast<int>(std::lround((dy + 0.5) * ppv / 4.0));
      if (u < 0 || u >= intr.width || v < 0 || v >= intr.height) {
        throw ConfigError("grid-room scene: wall window does not fit in the image");
      }
      const double x = (u - intr.cx) * zq / intr.fx;
      const double y = (v - intr.cy) * zq / intr.fy;
      if (std::floor(x / vs) != static_cast<double>(dx) ||
          std::floor(y / vs) != static_cast<double>(dy)) {
        throw ConfigError("grid-room scene: pixel alignment left voxel (" + std::to_string(dx) +
                          "," + std::to_string(dy) + ")");
      }
      depth.at(u, v) = static_cast<std::uint16_t>(raw);
      window_pixels.emplace_back(u, v);
    }
  }

  SyntheticScene scene;
  scene.voxel_size = vs;
  scene.sequence.intrinsics = intr;
  std::mt19937_64 rng(spec.seed);
  const std::uint64_t span = 2ull * static_cast<std::uint64_t>(ve);
  for (int k = 0; k < spec.frame_count; ++k) {
    const auto a = static_cast<std::int32_t>(rng() % span);
    const auto b = static_cast<std::int32_t>(rng() % span);

    FrameRecord frame;
    frame.id = k;
    frame.timestamp = static_cast<double>(k);
    frame.pose.translation = {a * vs, b * vs, 0.0};
    scene.sequence.frames.push_back(frame);
    scene.depth_images.push_back(depth);

    FrameVoxelSet set;
    set.reserve(static_cast<std::size_t>(ve) * ve);
    for (int dx = 0; dx < ve; ++dx) {
      for (int dy = 0; dy < ve; ++dy) {
        set.push_back(VoxelKey{a + dx, b + dy, z_index});
      }
    }
    scene.expected.frame_ids.push_back(k);
    scene.expected.sets.push_back(std::move(set));
  }
  return scene;
}

}  // namespace

SyntheticScene generate_synthetic_scene(const SyntheticSceneSpec& spec) {
  validate_spec_common(spec);
  if (spec.kind == "corridor") return make_corridor(spec);
  if (spec.kind == "grid-room") return make_grid_room(spec);
  throw ConfigError("synthetic scene: unknown kind '" + spec.kind +
                    "' (expected corridor or grid-room)");
}

void write_scene(SyntheticScene& scene, const std::filesystem::path& root) {
  std::filesystem::create_directories(root / "depth");

  write_intrinsics(root / "intrinsics.txt", scene.sequence.intrinsics);

  std::ofstream traj(root / "trajectory.txt");
  std::ofstream assoc(root / "associations.txt");
  if (!traj || !assoc) {
    throw InputError("write_scene: cannot create files under " + root.string());
  }
  traj << "# timestamp tx ty tz qx qy qz qw\n";
  char buf[512];
  for (std::size_t k = 0; k < scene.sequence.frames.size(); ++k) {
    FrameRecord& frame = scene.sequence.frames[k];
    const Eigen::Quaterniond& q = frame.pose.rotation;
    std::snprintf(buf, sizeof(buf), "%.6f %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n",
                  frame.timestamp, frame.pose.translation.x(), frame.pose.translation.y(),
                  frame.pose.translation.z(), q.x(), q.y(), q.z(), q.w());
    traj << buf;

    std::snprintf(buf, sizeof(buf), "depth/%06zu.png", k);
    const std::string rel = buf;
    write_depth_png(root / rel, scene.depth_images[k]);
    frame.depth_path = root / rel;
    assoc << k << ' ' << rel << '\n';
  }
  if (!traj || !assoc) {
    throw InputError("write_scene: write failed under " + root.string());
  }
}

}  // namespace vprdb
