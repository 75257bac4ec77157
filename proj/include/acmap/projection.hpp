#pragma once

#include "acmap/image.hpp"
#include "acmap/labelfield.hpp"
#include "acmap/pointcloud.hpp"
#include "acmap/types.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <vector>

namespace acmap {

inline constexpr uint32_t kNoPoint = 0xffffffffu;

struct CameraModel {
  double focal_px = 525.0;       // image plane distance F, pixels
  int width = 640;
  int height = 480;
  double cx = 319.5;             // principal point, pixels
  double cy = 239.5;
  double metres_to_px = 1.0;     // sensor-plane unit conversion

  void validate() const {
    if (focal_px <= 0.0) throw ValidationError("camera focal distance must be > 0");
    if (width <= 0 || height <= 0) throw ValidationError("camera image size must be positive");
    if (cx < 0 || cx > width - 1 || cy < 0 || cy > height - 1)
      throw ValidationError("principal point must lie inside the image");
    if (metres_to_px <= 0.0) throw ValidationError("camera scale must be > 0");
  }

  /// Perspective projection of a sensor-frame point onto the image plane:
  /// the point is scaled to pixel units, its offset from the camera axis is
  /// multiplied by F/Z (both in pixels), and the principal point is added
  /// back. Requires p.z() > 0.
  Eigen::Vector2d project(const Vec3& p) const {
    const double z_px = metres_to_px * p.z();
    const double s = focal_px / z_px;
    return {metres_to_px * p.x() * s + cx, metres_to_px * p.y() * s + cy};
  }
};

/// Rounds to the nearest pixel, halves away from zero on both axes.
inline Eigen::Vector2i to_pixel(const Eigen::Vector2d& uv) {
  return {int(std::lround(uv.x())), int(std::lround(uv.y()))};
}

struct ReconstructedImage {
  Image<Color> color;
  Image<double> depth;          // metres; 0 where no point landed
  Image<uint32_t> point_index;  // index into the source frame, kNoPoint when none
  Image<uint8_t> hole;          // 1 = no projected point (pre-fill), cleared by filling
  CameraModel camera;
  size_t dropped_out_of_bounds = 0;
  size_t dropped_nonpositive_z = 0;

  int width() const { return color.width(); }
  int height() const { return color.height(); }
};

/// Projects every frame point onto the image plane; pixel conflicts resolve
/// by nearest depth (first point wins an exact tie). Out-of-bounds
/// projections are dropped and counted. An empty frame yields an all-hole
/// image.
inline ReconstructedImage project_frame(const PointCloudFrame& frame,
                                        const CameraModel& cam) {
  cam.validate();
  ReconstructedImage img;
  img.camera = cam;
  img.color = Image<Color>(cam.width, cam.height, Color{0, 0, 0});
  img.depth = Image<double>(cam.width, cam.height, 0.0);
  img.point_index = Image<uint32_t>(cam.width, cam.height, kNoPoint);
  img.hole = Image<uint8_t>(cam.width, cam.height, 1);

  for (size_t i = 0; i < frame.points.size(); ++i) {
    const Point& pt = frame.points[i];
    if (pt.p.z() <= 0.0) {
      ++img.dropped_nonpositive_z;
      continue;
    }
    const Eigen::Vector2i px = to_pixel(cam.project(pt.p));
    if (!img.color.in_bounds(px.x(), px.y())) {
      ++img.dropped_out_of_bounds;
      continue;
    }
    const double z = pt.p.z();
    if (img.hole.at(px.x(), px.y()) || z < img.depth.at(px.x(), px.y())) {
      img.color.at(px.x(), px.y()) = pt.color;
      img.depth.at(px.x(), px.y()) = z;
      img.point_index.at(px.x(), px.y()) = uint32_t(i);
      img.hole.at(px.x(), px.y()) = 0;
    }
  }
  return img;
}

/// Mean-filter hole filling. Each pass gives every hole pixel with at least
/// one non-hole neighbour inside the (kernel x kernel) window the unweighted
/// mean colour of those neighbours, working from the previous pass's state.
/// Non-hole pixels are never modified; filled pixels clear their hole flag
/// but keep point_index = none. Stops when a pass fills nothing or after
/// max_iters passes.
inline ReconstructedImage fill_holes(const ReconstructedImage& src, int kernel = 5,
                                     int max_iters = 8) {
  if (kernel < 3 || kernel % 2 == 0)
    throw ValidationError("hole-fill kernel must be odd and >= 3");
  if (max_iters < 0) throw ValidationError("hole-fill max_iters must be >= 0");

  ReconstructedImage img = src;
  const int r = kernel / 2;
  const int w = img.width(), h = img.height();

  for (int iter = 0; iter < max_iters; ++iter) {
    const Image<uint8_t> hole_prev = img.hole;
    const Image<Color> color_prev = img.color;
    size_t filled = 0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (!hole_prev.at(x, y)) continue;
        long sr = 0, sg = 0, sb = 0;
        int n = 0;
        for (int dy = -r; dy <= r; ++dy) {
          for (int dx = -r; dx <= r; ++dx) {
            const int nx = x + dx, ny = y + dy;
            if (!hole_prev.in_bounds(nx, ny) || hole_prev.at(nx, ny)) continue;
            const Color& c = color_prev.at(nx, ny);
            sr += c.r;
            sg += c.g;
            sb += c.b;
            ++n;
          }
        }
        if (n == 0) continue;
        img.color.at(x, y) = Color{uint8_t(std::lround(double(sr) / n)),
                                   uint8_t(std::lround(double(sg) / n)),
                                   uint8_t(std::lround(double(sb) / n))};
        img.hole.at(x, y) = 0;
        ++filled;
      }
    }
    if (filled == 0) break;
  }
  return img;
}

/// True when another fill pass would change nothing.
inline bool has_fillable_holes(const ReconstructedImage& img, int kernel = 5) {
  const int r = kernel / 2;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      if (!img.hole.at(x, y)) continue;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
          if (img.hole.in_bounds(x + dx, y + dy) && !img.hole.at(x + dx, y + dy))
            return true;
    }
  return false;
}

/// Carries each point's pixel label back to the point: owners and occluded
/// points both read the pixel they project to; points that fall outside the
/// image (or have z <= 0) become Unknown.
inline std::vector<SemanticLabel> backproject_labels(const ReconstructedImage& img,
                                                     const LabelField& labels,
                                                     const PointCloudFrame& frame) {
  if (labels.width() != img.width() || labels.height() != img.height())
    throw ValidationError("label field dimensions do not match the image");
  std::vector<SemanticLabel> out(frame.points.size(), SemanticLabel::Unknown);
  for (size_t i = 0; i < frame.points.size(); ++i) {
    const Vec3& p = frame.points[i].p;
    if (p.z() <= 0.0) continue;
    const Eigen::Vector2i px = to_pixel(img.camera.project(p));
    if (!img.color.in_bounds(px.x(), px.y())) continue;
    out[i] = labels.argmax(px.x(), px.y());
  }
  return out;
}

/// Debug dump: color image (.png or .ppm by extension), 16-bit depth PGM in
/// millimetres, and the raw pixel->point correspondence sidecar (row-major
/// u32, 0xffffffff = none).
inline void dump_reconstructed(const ReconstructedImage& img, const std::string& color_path,
                               const std::string& depth_path,
                               const std::string& corr_path) {
  if (!color_path.empty()) {
    if (color_path.size() > 4 && color_path.substr(color_path.size() - 4) == ".png")
      imgio::write_png_rgb(img.color, color_path);
    else
      imgio::write_ppm(img.color, color_path);
  }
  if (!depth_path.empty()) {
    Image<uint16_t> mm(img.width(), img.height(), 0);
    for (size_t i = 0; i < mm.size(); ++i) {
      double d = img.depth.data()[i] * 1000.0;
      mm.data()[i] = uint16_t(std::min(d, 65535.0));
    }
    imgio::write_pgm16(mm, depth_path);
  }
  if (!corr_path.empty()) {
    std::ofstream out(corr_path, std::ios::binary);
    if (!out) throw IoError("cannot write correspondence sidecar '" + corr_path + "'");
    out.write(reinterpret_cast<const char*>(img.point_index.data().data()),
              std::streamsize(img.point_index.size() * sizeof(uint32_t)));
    if (!out) throw IoError("write failed for '" + corr_path + "'");
  }
}

}  // namespace acmap
