#pragma once

#include "acmap/kv.hpp"
#include "acmap/material.hpp"
#include "acmap/pointcloud.hpp"
#include "acmap/types.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace acmap::synth {

/// Deterministic random stream; same seed gives the same values on every
/// platform (no std distributions, which are implementation-defined).
class Rng {
public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  double uniform01() { return double(gen_() >> 11) * 0x1.0p-53; }

  double gauss() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = uniform01();
    } while (u1 <= 0.0);
    u2 = uniform01();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    spare_ = mag * std::sin(2.0 * M_PI * u2);
    has_spare_ = true;
    return mag * std::cos(2.0 * M_PI * u2);
  }

  uint64_t next() { return gen_(); }

private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

struct SceneBox {
  SemanticLabel label = SemanticLabel::Furniture;
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();
  Color color;
  double dropout = 0.0;  // probability a hit on this box returns nothing
};

/// Room interior [0, extents] with six labeled faces (four walls, floor,
/// ceiling) plus labeled axis-aligned boxes.
struct SceneSpec {
  Vec3 extents = Vec3(6.7, 6.8, 2.5);
  Color wall_color{200, 200, 205};
  Color floor_color{120, 110, 100};
  Color ceiling_color{240, 240, 240};
  std::vector<SceneBox> boxes;

  void validate() const {
    if (extents.minCoeff() <= 0.0)
      throw ValidationError("scene extents must be positive");
    for (const auto& b : boxes) {
      if (b.label == SemanticLabel::Unknown)
        throw ValidationError("scene boxes must carry one of the 8 object labels");
      if ((b.max - b.min).minCoeff() <= 0.0)
        throw ValidationError("scene box must have positive size");
      if (b.min.minCoeff() < 0.0 || (extents - b.max).minCoeff() < 0.0)
        throw ValidationError("scene box must lie inside the room");
      if (!(b.dropout >= 0.0 && b.dropout < 1.0))
        throw ValidationError("box dropout must be in [0, 1)");
    }
  }

  bool contains(const Vec3& p) const {
    return p.x() > 0 && p.x() < extents.x() && p.y() > 0 && p.y() < extents.y() &&
           p.z() > 0 && p.z() < extents.z();
  }
};

struct SensorSpec {
  int points_per_frame = 30000;
  double height = 1.08;          // sensor height above the floor, metres
  double hfov_deg = 57.0;
  double vfov_deg = 43.0;
  double max_range = 8.0;
  double depth_noise_std = 0.0;  // additive Gaussian on range, metres
  double label_noise_p = 0.0;

  void validate() const {
    if (points_per_frame <= 0) throw ValidationError("points per frame must be > 0");
    if (height <= 0.0) throw ValidationError("sensor height must be > 0");
    if (hfov_deg < 0.0 || hfov_deg >= 180.0 || vfov_deg < 0.0 || vfov_deg >= 180.0)
      throw ValidationError("sensor FOV must be in [0, 180) degrees");
    if (max_range <= 0.0) throw ValidationError("sensor max range must be > 0");
    if (depth_noise_std < 0.0) throw ValidationError("depth noise stddev must be >= 0");
    if (!(label_noise_p >= 0.0 && label_noise_p < 0.5))
      throw ValidationError("label noise probability must be in [0, 0.5)");
  }
};

namespace detail {

struct SurfaceHit {
  double t = std::numeric_limits<double>::infinity();
  SemanticLabel label = SemanticLabel::Unknown;
  Color color;
  double dropout = 0.0;
};

// Exit of a ray starting inside the room: nearest face crossing.
inline SurfaceHit room_shell_hit(const SceneSpec& scene, const Vec3& o, const Vec3& d) {
  SurfaceHit hit;
  for (int a = 0; a < 3; ++a) {
    double t, plane;
    if (d[a] > 0.0) plane = scene.extents[a];
    else if (d[a] < 0.0) plane = 0.0;
    else continue;
    t = (plane - o[a]) / d[a];
    if (t < hit.t) {
      hit.t = t;
      if (a == 2)
        hit.label = d[a] < 0.0 ? SemanticLabel::Floor : SemanticLabel::Ceiling;
      else
        hit.label = SemanticLabel::Wall;
      hit.color = a == 2 ? (d[a] < 0.0 ? scene.floor_color : scene.ceiling_color)
                         : scene.wall_color;
      hit.dropout = 0.0;
    }
  }
  return hit;
}

inline std::optional<double> box_entry(const SceneBox& b, const Vec3& o, const Vec3& d) {
  double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < b.min[a] || o[a] > b.max[a]) return std::nullopt;
      continue;
    }
    double ta = (b.min[a] - o[a]) / d[a];
    double tb = (b.max[a] - o[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return std::nullopt;
  }
  if (t0 <= 1e-9) return std::nullopt;  // behind or at the origin
  return t0;
}

}  // namespace detail

/// Casts `points_per_frame` rays over the sensor FOV from `pose` and returns
/// the sensor-frame point cloud plus the true label of each point.
/// Deterministic for a fixed seed. A zero-FOV sensor degenerates to a single
/// central ray.
inline std::pair<PointCloudFrame, std::vector<SemanticLabel>> render_frame(
    const SceneSpec& scene, const SensorSpec& sensor, const Pose& pose, uint64_t seed,
    double timestamp = 0.0) {
  scene.validate();
  sensor.validate();
  pose.validate();
  if (!scene.contains(pose.t))
    throw ValidationError("sensor pose lies outside the room");
  for (const auto& b : scene.boxes)
    if (pose.t.x() >= b.min.x() && pose.t.x() <= b.max.x() && pose.t.y() >= b.min.y() &&
        pose.t.y() <= b.max.y() && pose.t.z() >= b.min.z() && pose.t.z() <= b.max.z())
      throw ValidationError("sensor pose lies inside a scene box");

  Rng rng(seed);
  const double tan_h = std::tan(sensor.hfov_deg * M_PI / 360.0);
  const double tan_v = std::tan(sensor.vfov_deg * M_PI / 360.0);
  const bool degenerate = sensor.hfov_deg == 0.0 && sensor.vfov_deg == 0.0;
  const int n_rays = degenerate ? 1 : sensor.points_per_frame;

  PointCloudFrame frame;
  frame.pose = pose;
  frame.timestamp = timestamp;
  frame.points.reserve(size_t(n_rays));
  std::vector<SemanticLabel> labels;
  labels.reserve(size_t(n_rays));

  for (int r = 0; r < n_rays; ++r) {
    Vec3 dir_s(0.0, 0.0, 1.0);
    if (!degenerate) {
      const double tx = tan_h * (2.0 * rng.uniform01() - 1.0);
      const double ty = tan_v * (2.0 * rng.uniform01() - 1.0);
      dir_s = Vec3(tx, ty, 1.0).normalized();
    }
    const Vec3 dir_w = pose.q * dir_s;

    detail::SurfaceHit hit = detail::room_shell_hit(scene, pose.t, dir_w);
    for (const auto& b : scene.boxes) {
      if (auto t = detail::box_entry(b, pose.t, dir_w)) {
        if (*t < hit.t) hit = {*t, b.label, b.color, b.dropout};
      }
    }
    if (!std::isfinite(hit.t) || hit.t > sensor.max_range) continue;
    if (hit.dropout > 0.0 && rng.uniform01() < hit.dropout) continue;

    double range = hit.t;
    if (sensor.depth_noise_std > 0.0)
      range = std::max(1e-3, range + sensor.depth_noise_std * rng.gauss());

    frame.points.push_back({dir_s * range, hit.color});
    labels.push_back(hit.label);
  }
  return {std::move(frame), std::move(labels)};
}

/// Replaces each label, independently with probability p, by a label drawn
/// uniformly from the other eight. Deterministic per seed.
inline std::vector<SemanticLabel> corrupt_labels(const std::vector<SemanticLabel>& labels,
                                                 double p, uint64_t seed) {
  if (!(p >= 0.0 && p < 0.5))
    throw ValidationError("label noise probability must be in [0, 0.5)");
  Rng rng(seed);
  std::vector<SemanticLabel> out = labels;
  if (p == 0.0) return out;
  for (auto& l : out) {
    if (rng.uniform01() >= p) continue;
    int other = int(rng.uniform01() * (kLabelCount - 1));
    if (other >= int(l)) ++other;
    l = SemanticLabel(other);
  }
  return out;
}

struct Waypoint {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;  // radians, world heading of the camera forward axis
};

/// Camera-to-world rotation for a horizontal view: camera Z maps to the
/// heading, camera X to image-right, camera Y to straight down.
inline Quat yaw_to_quat(double yaw) {
  Eigen::Matrix3d R;
  R.col(0) = Vec3(std::sin(yaw), -std::cos(yaw), 0.0);  // right
  R.col(1) = Vec3(0.0, 0.0, -1.0);                      // down
  R.col(2) = Vec3(std::cos(yaw), std::sin(yaw), 0.0);   // forward
  Quat q(R);
  q.normalize();
  return q;
}

/// Poses along the waypoint polyline: linear position interpolation and
/// shortest-arc heading interpolation, all at sensor height. Segment
/// endpoints are shared (not duplicated). Timestamps advance by dt.
inline Trajectory generate_trajectory(const SceneSpec& scene,
                                      const std::vector<Waypoint>& waypoints,
                                      int frames_per_segment, double sensor_height,
                                      double dt = 1.0 / 30.0, double start_time = 0.0) {
  scene.validate();
  if (waypoints.empty()) throw ValidationError("trajectory needs at least one waypoint");
  if (sensor_height <= 0.0 || sensor_height >= scene.extents.z())
    throw ValidationError("sensor height must lie inside the room");
  for (const auto& w : waypoints)
    if (!scene.contains(Vec3(w.x, w.y, sensor_height)))
      throw ValidationError("waypoint outside the room");

  Trajectory traj;
  int frame = 0;
  auto emit = [&](double x, double y, double yaw) {
    Pose pose;
    pose.t = Vec3(x, y, sensor_height);
    pose.q = yaw_to_quat(yaw);
    traj.add(start_time + frame * dt, pose);
    ++frame;
  };

  if (waypoints.size() == 1) {
    for (int f = 0; f < std::max(1, frames_per_segment); ++f)
      emit(waypoints[0].x, waypoints[0].y, waypoints[0].yaw);
    return traj;
  }
  if (frames_per_segment < 2)
    throw ValidationError("frames per segment must be >= 2 for multi-waypoint paths");

  for (size_t s = 0; s + 1 < waypoints.size(); ++s) {
    const Waypoint& a = waypoints[s];
    const Waypoint& b = waypoints[s + 1];
    double dyaw = std::remainder(b.yaw - a.yaw, 2.0 * M_PI);
    for (int f = (s == 0 ? 0 : 1); f < frames_per_segment; ++f) {
      const double alpha = double(f) / (frames_per_segment - 1);
      emit(a.x + alpha * (b.x - a.x), a.y + alpha * (b.y - a.y), a.yaw + alpha * dyaw);
    }
  }
  return traj;
}

// ---- config & sidecar files ----

inline SceneSpec load_scene(const std::string& path) {
  KvFile kv = KvFile::parse(path);
  kv.restrict_keys({"extents", "wall_color", "floor_color", "ceiling_color", "box"});
  SceneSpec scene;
  auto parse_vec3 = [&](const std::string& key, Vec3 fallback) {
    auto v = kv.get(key);
    if (!v) return fallback;
    std::istringstream ls(*v);
    Vec3 out;
    if (!(ls >> out.x() >> out.y() >> out.z()))
      throw ParseError(path, "key '" + key + "': expected three numbers");
    return out;
  };
  auto parse_color = [&](const std::string& key, Color fallback) {
    auto v = kv.get(key);
    if (!v) return fallback;
    std::istringstream ls(*v);
    int r, g, b;
    if (!(ls >> r >> g >> b))
      throw ParseError(path, "key '" + key + "': expected 'r g b'");
    return Color{uint8_t(r), uint8_t(g), uint8_t(b)};
  };
  scene.extents = parse_vec3("extents", scene.extents);
  scene.wall_color = parse_color("wall_color", scene.wall_color);
  scene.floor_color = parse_color("floor_color", scene.floor_color);
  scene.ceiling_color = parse_color("ceiling_color", scene.ceiling_color);
  for (const auto& line : kv.get_all("box")) {
    std::istringstream ls(line);
    std::string label;
    SceneBox box;
    int r, g, b;
    if (!(ls >> label >> box.min.x() >> box.min.y() >> box.min.z() >> box.max.x() >>
          box.max.y() >> box.max.z() >> r >> g >> b))
      throw ParseError(path, "box: expected 'Label x0 y0 z0 x1 y1 z1 r g b [dropout]'");
    ls >> box.dropout;  // optional
    auto l = label_from_name(label);
    if (!l) throw ParseError(path, "box: unknown label '" + label + "'");
    box.label = *l;
    box.color = Color{uint8_t(r), uint8_t(g), uint8_t(b)};
    scene.boxes.push_back(box);
  }
  scene.validate();
  return scene;
}

inline SensorSpec load_sensor(const std::string& path) {
  KvFile kv = KvFile::parse(path);
  kv.restrict_keys({"points_per_frame", "height", "hfov_deg", "vfov_deg", "max_range",
                    "depth_noise_std", "label_noise_p"});
  SensorSpec s;
  s.points_per_frame = kv.get_int("points_per_frame", s.points_per_frame);
  s.height = kv.get_double("height", s.height);
  s.hfov_deg = kv.get_double("hfov_deg", s.hfov_deg);
  s.vfov_deg = kv.get_double("vfov_deg", s.vfov_deg);
  s.max_range = kv.get_double("max_range", s.max_range);
  s.depth_noise_std = kv.get_double("depth_noise_std", s.depth_noise_std);
  s.label_noise_p = kv.get_double("label_noise_p", s.label_noise_p);
  s.validate();
  return s;
}

inline std::vector<Waypoint> load_waypoints(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open waypoint file '" + path + "'");
  std::vector<Waypoint> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = KvFile::trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::istringstream ls(t);
    Waypoint w;
    double yaw_deg;
    if (!(ls >> w.x >> w.y >> yaw_deg))
      throw ParseError(path, lineno, "expected 'x y yaw_deg'");
    w.yaw = yaw_deg * M_PI / 180.0;
    out.push_back(w);
  }
  return out;
}

/// Ground-truth label sidecar: "ACLB" magic, u32 count, one u8 label per
/// point in frame order.
inline void save_labels(const std::vector<SemanticLabel>& labels, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write label sidecar '" + path + "'");
  out.write("ACLB", 4);
  const uint32_t count = uint32_t(labels.size());
  out.write(reinterpret_cast<const char*>(&count), 4);
  for (SemanticLabel l : labels) {
    const uint8_t v = uint8_t(l);
    out.write(reinterpret_cast<const char*>(&v), 1);
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline std::vector<SemanticLabel> load_labels(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open label sidecar '" + path + "'");
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::string(magic, 4) != "ACLB")
    throw ParseError(path, "bad label sidecar magic");
  uint32_t count = 0;
  in.read(reinterpret_cast<char*>(&count), 4);
  std::vector<uint8_t> buf(count);
  in.read(reinterpret_cast<char*>(buf.data()), count);
  if (size_t(in.gcount()) != count) throw ParseError(path, "truncated label sidecar");
  std::vector<SemanticLabel> out(count);
  for (size_t i = 0; i < count; ++i) {
    if (buf[i] >= kLabelCount)
      throw ParseError(path, "label id " + std::to_string(buf[i]) + " out of range");
    out[i] = SemanticLabel(buf[i]);
  }
  return out;
}

}  // namespace acmap::synth
