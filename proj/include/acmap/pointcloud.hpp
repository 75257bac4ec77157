#pragma once

#include "acmap/pcd.hpp"
#include "acmap/ply.hpp"
#include "acmap/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace acmap {

struct Point {
  Vec3 p;
  Color color;
};

struct Pose {
  Vec3 t = Vec3::Zero();
  Quat q = Quat::Identity();

  void validate() const {
    if (std::abs(q.norm() - 1.0) > 1e-9)
      throw ValidationError("pose quaternion is not unit (norm " +
                            std::to_string(q.norm()) + ")");
  }

  Vec3 apply(const Vec3& p) const { return q * p + t; }
};

struct PointCloudFrame {
  std::vector<Point> points;
  Pose pose;
  double timestamp = 0.0;
};

enum class CloudFormat { Ply, Pcd };

struct FrameParseStats {
  size_t dropped_nonfinite = 0;
  size_t dropped_nonpositive_z = 0;
};

namespace detail {

inline std::optional<double> comment_timestamp(const std::vector<std::string>& comments) {
  for (const auto& c : comments) {
    std::istringstream ls(c);
    std::string key;
    ls >> key;
    if (key == "timestamp") {
      double t;
      if (ls >> t) return t;
    }
  }
  return std::nullopt;
}

inline std::optional<Pose> comment_pose(const std::vector<std::string>& comments) {
  for (const auto& c : comments) {
    std::istringstream ls(c);
    std::string key;
    ls >> key;
    if (key == "pose") {
      Pose p;
      double qx, qy, qz, qw;
      if (ls >> p.t.x() >> p.t.y() >> p.t.z() >> qx >> qy >> qz >> qw) {
        p.q = Quat(qw, qx, qy, qz);
        p.validate();
        return p;
      }
    }
  }
  return std::nullopt;
}

inline CloudFormat format_from_extension(const std::string& path) {
  auto dot = path.rfind('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  for (auto& c : ext) c = char(std::tolower(c));
  if (ext == "ply") return CloudFormat::Ply;
  if (ext == "pcd") return CloudFormat::Pcd;
  throw ValidationError("cannot infer point-cloud format from '" + path +
                        "' (expected .ply or .pcd)");
}

}  // namespace detail

/// Parses a posed RGB frame. Color is required (it feeds segmentation).
/// Points with non-finite coordinates or z <= 0 are dropped and counted;
/// timestamp and pose are taken from header comments when present.
inline PointCloudFrame parse_frame(const std::string& path, CloudFormat format,
                                   FrameParseStats* stats = nullptr) {
  ply::Cloud cloud = format == CloudFormat::Ply ? ply::read(path) : pcd::read(path);
  if (!cloud.has_color())
    throw ValidationError("'" + path + "': color required (cloud has no RGB properties)");

  PointCloudFrame frame;
  FrameParseStats local;
  frame.points.reserve(cloud.xyz.size());
  for (size_t i = 0; i < cloud.xyz.size(); ++i) {
    const Vec3& p = cloud.xyz[i];
    if (!p.allFinite()) {
      ++local.dropped_nonfinite;
      continue;
    }
    if (p.z() <= 0.0) {
      ++local.dropped_nonpositive_z;
      continue;
    }
    frame.points.push_back({p, cloud.rgb[i]});
  }
  if (auto ts = detail::comment_timestamp(cloud.comments)) frame.timestamp = *ts;
  if (auto pose = detail::comment_pose(cloud.comments)) frame.pose = *pose;
  if (stats) *stats = local;
  return frame;
}

inline PointCloudFrame parse_frame(const std::string& path,
                                   FrameParseStats* stats = nullptr) {
  return parse_frame(path, detail::format_from_extension(path), stats);
}

/// Applies the frame pose to every point (p -> R p + t). The returned frame
/// carries an identity pose: its points are world-frame coordinates.
inline PointCloudFrame to_world(const PointCloudFrame& frame) {
  frame.pose.validate();
  PointCloudFrame out;
  out.timestamp = frame.timestamp;
  out.pose = Pose{};
  out.points.reserve(frame.points.size());
  for (const auto& pt : frame.points)
    out.points.push_back({frame.pose.apply(pt.p), pt.color});
  return out;
}

/// Writes the frame as PLY with timestamp and pose header comments.
inline void write_frame(const PointCloudFrame& frame, const std::string& path,
                        bool binary = true) {
  std::vector<Vec3> xyz;
  std::vector<Color> rgb;
  xyz.reserve(frame.points.size());
  rgb.reserve(frame.points.size());
  for (const auto& pt : frame.points) {
    xyz.push_back(pt.p);
    rgb.push_back(pt.color);
  }
  char ts[64], ps[256];
  std::snprintf(ts, sizeof(ts), "timestamp %.9f", frame.timestamp);
  std::snprintf(ps, sizeof(ps), "pose %.9f %.9f %.9f %.17g %.17g %.17g %.17g",
                frame.pose.t.x(), frame.pose.t.y(), frame.pose.t.z(),
                frame.pose.q.x(), frame.pose.q.y(), frame.pose.q.z(),
                frame.pose.q.w());
  ply::write(path, xyz, rgb, binary, {ts, ps});
}

/// Timestamped pose sequence. Lookups are exact-match: a frame whose
/// timestamp has no pose (within 1e-6 s) is a hard error, interpolation is
/// deliberately not offered.
class Trajectory {
public:
  struct Entry {
    double timestamp;
    Pose pose;
  };

  void add(double timestamp, const Pose& pose) {
    pose.validate();
    entries_.push_back({timestamp, pose});
    std::sort(entries_.begin(), entries_.end(),
              [](const Entry& a, const Entry& b) { return a.timestamp < b.timestamp; });
  }

  const std::vector<Entry>& entries() const { return entries_; }
  size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  std::optional<Pose> find(double timestamp, double tol = 1e-6) const {
    for (const auto& e : entries_)
      if (std::abs(e.timestamp - timestamp) <= tol) return e.pose;
    return std::nullopt;
  }

  Pose require(double timestamp, double tol = 1e-6) const {
    auto p = find(timestamp, tol);
    if (!p) {
      char buf[96];
      std::snprintf(buf, sizeof(buf), "no pose for frame timestamp %.6f", timestamp);
      throw ValidationError(buf);
    }
    return *p;
  }

private:
  std::vector<Entry> entries_;
};

/// Trajectory file: one line per frame, "timestamp tx ty tz qx qy qz qw".
inline Trajectory load_trajectory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trajectory '" + path + "'");
  Trajectory traj;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = line;
    if (!t.empty() && t.back() == '\r') t.pop_back();
    if (t.empty() || t[0] == '#') continue;
    std::istringstream ls(t);
    double ts, qx, qy, qz, qw;
    Pose pose;
    if (!(ls >> ts >> pose.t.x() >> pose.t.y() >> pose.t.z() >> qx >> qy >> qz >> qw))
      throw ParseError(path, lineno, "expected 'timestamp tx ty tz qx qy qz qw'");
    pose.q = Quat(qw, qx, qy, qz);
    pose.validate();
    traj.add(ts, pose);
  }
  return traj;
}

inline void save_trajectory(const Trajectory& traj, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write trajectory '" + path + "'");
  out << "# timestamp tx ty tz qx qy qz qw\n";
  char buf[320];
  for (const auto& e : traj.entries()) {
    std::snprintf(buf, sizeof(buf), "%.9f %.9f %.9f %.9f %.17g %.17g %.17g %.17g\n",
                  e.timestamp, e.pose.t.x(), e.pose.t.y(), e.pose.t.z(),
                  e.pose.q.x(), e.pose.q.y(), e.pose.q.z(), e.pose.q.w());
    out << buf;
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace acmap
