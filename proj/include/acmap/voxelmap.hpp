#pragma once

#include "acmap/material.hpp"
#include "acmap/ply.hpp"
#include "acmap/types.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace acmap {

/// Integer cell index: floor(world / resolution) per axis, so the cell
/// [0, res) maps to index 0.
struct VoxelKey {
  int32_t i = 0;
  int32_t j = 0;
  int32_t k = 0;

  bool operator==(const VoxelKey&) const = default;

  static VoxelKey from_point(const Vec3& p, double resolution) {
    return {int32_t(std::floor(p.x() / resolution)),
            int32_t(std::floor(p.y() / resolution)),
            int32_t(std::floor(p.z() / resolution))};
  }

  Vec3 center(double resolution) const {
    return {(i + 0.5) * resolution, (j + 0.5) * resolution, (k + 0.5) * resolution};
  }

  bool operator<(const VoxelKey& o) const {
    if (i != o.i) return i < o.i;
    if (j != o.j) return j < o.j;
    return k < o.k;
  }
};

struct VoxelKeyHash {
  size_t operator()(const VoxelKey& v) const noexcept {
    size_t seed = 0;
    seed ^= std::hash<int32_t>{}(v.i) + 0x9e3779b9 + (seed << 6) + (seed >> 2);
    seed ^= std::hash<int32_t>{}(v.j) + 0x9e3779b9 + (seed << 6) + (seed >> 2);
    seed ^= std::hash<int32_t>{}(v.k) + 0x9e3779b9 + (seed << 6) + (seed >> 2);
    return seed;
  }
};

namespace voxel_detail {

// 21 bits per axis (offset-binary): +-2^20 cells from the origin, plenty for
// indoor maps and cheap to hash in the per-frame dedup sets.
inline constexpr int64_t kPackBias = 1 << 20;

inline uint64_t pack_key(const VoxelKey& k) {
  return (uint64_t(uint32_t(k.i + kPackBias)) & 0x1fffff) << 42 |
         (uint64_t(uint32_t(k.j + kPackBias)) & 0x1fffff) << 21 |
         (uint64_t(uint32_t(k.k + kPackBias)) & 0x1fffff);
}

inline VoxelKey unpack_key(uint64_t v) {
  return {int32_t(((v >> 42) & 0x1fffff) - kPackBias),
          int32_t(((v >> 21) & 0x1fffff) - kPackBias),
          int32_t((v & 0x1fffff) - kPackBias)};
}

struct PackedHash {
  size_t operator()(uint64_t x) const noexcept {
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdull;
    x ^= x >> 33;
    return size_t(x);
  }
};

}  // namespace voxel_detail

struct VoxelCell {
  float log_odds = 0.0f;
  std::array<double, 3> color_mean{};  // running mean, 0-255 per channel
  uint32_t color_count = 0;
  std::array<uint32_t, kLabelCount> histogram{};  // 8 materials + unknown

  uint64_t histogram_total() const {
    uint64_t s = 0;
    for (uint32_t h : histogram) s += h;
    return s;
  }
};

enum class OccupancyState { Unknown, Free, Occupied };

struct UpdateStats {
  size_t points = 0;
  size_t hit_cells = 0;
  size_t miss_cells = 0;
  size_t rays_capped = 0;  // rays longer than max range: endpoint only, no carving
};

struct MapStats {
  size_t cells = 0;
  size_t occupied = 0;
  size_t free = 0;
  std::array<size_t, kLabelCount> material_cells{};
  size_t memory_bytes = 0;
  VoxelKey min_key{}, max_key{};
};

/// Visits the cells a segment crosses, in order, starting at the cell
/// containing `from` and stopping before the cell containing `to`
/// (endpoint excluded). Amanatides-Woo stepping.
template <typename Fn>
inline void traverse_ray(const Vec3& from, const Vec3& to, double resolution, Fn&& visit) {
  VoxelKey cur = VoxelKey::from_point(from, resolution);
  const VoxelKey end = VoxelKey::from_point(to, resolution);
  if (cur == end) return;

  const Vec3 d = to - from;
  std::array<int32_t, 3> step{};
  Vec3 t_max, t_delta;
  for (int a = 0; a < 3; ++a) {
    const double cell = (a == 0 ? cur.i : a == 1 ? cur.j : cur.k);
    if (d[a] > 0.0) {
      step[size_t(a)] = 1;
      t_max[a] = ((cell + 1.0) * resolution - from[a]) / d[a];
      t_delta[a] = resolution / d[a];
    } else if (d[a] < 0.0) {
      step[size_t(a)] = -1;
      t_max[a] = (cell * resolution - from[a]) / d[a];
      t_delta[a] = -resolution / d[a];
    } else {
      step[size_t(a)] = 0;
      t_max[a] = std::numeric_limits<double>::infinity();
      t_delta[a] = std::numeric_limits<double>::infinity();
    }
  }

  const long max_steps = std::abs(long(end.i) - cur.i) + std::abs(long(end.j) - cur.j) +
                         std::abs(long(end.k) - cur.k) + 3;
  visit(cur);
  for (long s = 0; s < max_steps; ++s) {
    int axis = 0;
    if (t_max[1] < t_max[axis]) axis = 1;
    if (t_max[2] < t_max[axis]) axis = 2;
    if (!(t_max[axis] <= 1.0)) return;  // numerically past the endpoint
    if (axis == 0) cur.i += step[0];
    else if (axis == 1) cur.j += step[1];
    else cur.k += step[2];
    t_max[axis] += t_delta[axis];
    if (cur == end) return;
    visit(cur);
  }
}

struct LabeledPoint {
  Vec3 p;            // world frame
  Color color;
  uint8_t material;  // 0..8, 8 = unknown
};

/// World-fixed sparse voxel grid fusing occupancy log-odds, running color
/// and a per-cell material histogram.
class OccupancyGrid {
public:
  explicit OccupancyGrid(double resolution = 0.1, double l_hit = 0.85,
                         double l_miss = -0.4, double l_min = -2.0, double l_max = 3.5,
                         double p_occ = 0.97)
      : resolution_(resolution), l_hit_(l_hit), l_miss_(l_miss), l_min_(l_min),
        l_max_(l_max), p_occ_(p_occ) {
    if (resolution <= 0.0) throw ValidationError("grid resolution must be > 0");
    if (!(l_hit > 0.0) || !(l_miss < 0.0))
      throw ValidationError("grid needs l_hit > 0 > l_miss");
    if (!(l_min < 0.0) || !(l_max > 0.0))
      throw ValidationError("grid needs l_min < 0 < l_max");
    if (!(p_occ > 0.0 && p_occ < 1.0))
      throw ValidationError("occupancy threshold must be in (0, 1)");
  }

  double resolution() const { return resolution_; }
  double l_hit() const { return l_hit_; }
  double l_miss() const { return l_miss_; }
  double l_min() const { return l_min_; }
  double l_max() const { return l_max_; }
  double p_occ() const { return p_occ_; }
  double occupancy_log_threshold() const { return std::log(p_occ_ / (1.0 - p_occ_)); }

  bool ray_carving() const { return ray_carving_; }
  void set_ray_carving(bool on) { ray_carving_ = on; }
  double max_ray_range() const { return max_ray_range_; }
  void set_max_ray_range(double r) {
    if (r <= 0.0) throw ValidationError("max ray range must be > 0");
    max_ray_range_ = r;
  }

  size_t cell_count() const { return cells_.size(); }
  const VoxelCell* cell(const VoxelKey& key) const {
    auto it = cells_.find(key);
    return it == cells_.end() ? nullptr : &it->second;
  }

  /// Inserts one frame of world-frame labeled points seen from `origin`.
  /// Every point updates its endpoint cell's color and histogram; occupancy
  /// log-odds receive at most one hit and one miss per cell per frame (hit
  /// beats miss), with free-space carving along each ray (endpoint excluded,
  /// origin cell included) when enabled.
  UpdateStats insert_labeled_frame(const std::vector<LabeledPoint>& points,
                                   const Vec3& origin) {
    UpdateStats stats;
    stats.points = points.size();

    std::unordered_set<uint64_t, voxel_detail::PackedHash> hits;
    std::unordered_set<uint64_t, voxel_detail::PackedHash> misses;
    hits.reserve(points.size());
    if (ray_carving_) misses.reserve(points.size() * 4);

    const double max_range2 = max_ray_range_ * max_ray_range_;
    for (const auto& pt : points) {
      if (!pt.p.allFinite())
        throw ValidationError("insert_labeled_frame: non-finite point");
      if (pt.material >= kLabelCount)
        throw ValidationError("insert_labeled_frame: material id " +
                              std::to_string(pt.material) + " out of range");
      const VoxelKey key = VoxelKey::from_point(pt.p, resolution_);
      VoxelCell& cell = cells_[key];

      const uint32_t n = ++cell.color_count;
      cell.color_mean[0] += (pt.color.r - cell.color_mean[0]) / n;
      cell.color_mean[1] += (pt.color.g - cell.color_mean[1]) / n;
      cell.color_mean[2] += (pt.color.b - cell.color_mean[2]) / n;
      ++cell.histogram[pt.material];

      hits.insert(voxel_detail::pack_key(key));
      if (ray_carving_) {
        if ((pt.p - origin).squaredNorm() <= max_range2)
          traverse_ray(origin, pt.p, resolution_, [&](const VoxelKey& c) {
            misses.insert(voxel_detail::pack_key(c));
          });
        else
          ++stats.rays_capped;
      }
    }

    for (uint64_t packed : hits)
      bump_log_odds(cells_[voxel_detail::unpack_key(packed)], l_hit_);
    for (uint64_t packed : misses) {
      if (hits.count(packed)) continue;  // hit beats miss within a frame
      bump_log_odds(cells_[voxel_detail::unpack_key(packed)], l_miss_);
    }
    stats.hit_cells = hits.size();
    stats.miss_cells = misses.size();
    return stats;
  }

  OccupancyState query_occupancy(const VoxelKey& key) const {
    const VoxelCell* c = cell(key);
    if (!c) return OccupancyState::Unknown;
    return occupied(*c) ? OccupancyState::Occupied : OccupancyState::Free;
  }

  /// Majority-vote material of an occupied cell: argmax over the 8 known
  /// material bins, lowest id on ties; the unknown bin wins only when every
  /// known bin is zero. Returns nothing for absent, non-occupied or
  /// never-labeled cells.
  std::optional<uint8_t> query_material(const VoxelKey& key) const {
    const VoxelCell* c = cell(key);
    if (!c || !occupied(*c)) return std::nullopt;
    return cell_material(*c);
  }

  static std::optional<uint8_t> cell_material(const VoxelCell& c) {
    uint32_t best = 0;
    int best_id = -1;
    for (int m = 0; m < kKnownLabelCount; ++m) {
      if (c.histogram[m] > best) {
        best = c.histogram[m];
        best_id = m;
      }
    }
    if (best_id >= 0) return uint8_t(best_id);
    if (c.histogram[kKnownLabelCount] > 0) return uint8_t(kKnownLabelCount);
    return std::nullopt;  // histogram empty
  }

  bool occupied(const VoxelCell& c) const {
    return double(c.log_odds) >= occupancy_log_threshold();
  }

  /// Keys sorted ascending; makes exports and snapshots byte-stable.
  std::vector<VoxelKey> sorted_keys() const {
    std::vector<VoxelKey> keys;
    keys.reserve(cells_.size());
    for (const auto& [key, cell] : cells_) keys.push_back(key);
    std::sort(keys.begin(), keys.end());
    return keys;
  }

  MapStats stats() const {
    MapStats s;
    s.cells = cells_.size();
    s.min_key = {std::numeric_limits<int32_t>::max(), std::numeric_limits<int32_t>::max(),
                 std::numeric_limits<int32_t>::max()};
    s.max_key = {std::numeric_limits<int32_t>::min(), std::numeric_limits<int32_t>::min(),
                 std::numeric_limits<int32_t>::min()};
    for (const auto& [key, cell] : cells_) {
      if (occupied(cell)) {
        ++s.occupied;
        if (auto m = cell_material(cell)) ++s.material_cells[*m];
      } else {
        ++s.free;
      }
      s.min_key.i = std::min(s.min_key.i, key.i);
      s.min_key.j = std::min(s.min_key.j, key.j);
      s.min_key.k = std::min(s.min_key.k, key.k);
      s.max_key.i = std::max(s.max_key.i, key.i);
      s.max_key.j = std::max(s.max_key.j, key.j);
      s.max_key.k = std::max(s.max_key.k, key.k);
    }
    if (s.cells == 0) s.min_key = s.max_key = VoxelKey{};
    s.memory_bytes = cells_.size() * (sizeof(VoxelKey) + sizeof(VoxelCell) + sizeof(void*)) +
                     cells_.bucket_count() * sizeof(void*);
    return s;
  }

  const std::unordered_map<VoxelKey, VoxelCell, VoxelKeyHash>& cells() const {
    return cells_;
  }

  // -- snapshot & export --

  void save_snapshot(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write map snapshot '" + path + "'");
    out.write("ACMAPSN1", 8);
    const double header[6] = {resolution_, l_hit_, l_miss_, l_min_, l_max_, p_occ_};
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    const uint64_t count = cells_.size();
    out.write(reinterpret_cast<const char*>(&count), 8);
    for (const VoxelKey& key : sorted_keys()) {
      const VoxelCell& c = cells_.at(key);
      out.write(reinterpret_cast<const char*>(&key.i), 4);
      out.write(reinterpret_cast<const char*>(&key.j), 4);
      out.write(reinterpret_cast<const char*>(&key.k), 4);
      out.write(reinterpret_cast<const char*>(&c.log_odds), 4);
      const uint8_t rgb[3] = {uint8_t(std::lround(c.color_mean[0])),
                              uint8_t(std::lround(c.color_mean[1])),
                              uint8_t(std::lround(c.color_mean[2]))};
      out.write(reinterpret_cast<const char*>(rgb), 3);
      out.write(reinterpret_cast<const char*>(&c.color_count), 4);
      out.write(reinterpret_cast<const char*>(c.histogram.data()),
                kLabelCount * 4);
    }
    if (!out) throw IoError("write failed for '" + path + "'");
  }

  static OccupancyGrid load_snapshot(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open map snapshot '" + path + "'");
    char magic[8];
    in.read(magic, 8);
    if (in.gcount() != 8 || std::string(magic, 8) != "ACMAPSN1")
      throw ParseError(path, "bad snapshot magic");
    double header[6];
    in.read(reinterpret_cast<char*>(header), sizeof(header));
    if (!in) throw ParseError(path, "truncated snapshot header");
    OccupancyGrid grid(header[0], header[1], header[2], header[3], header[4], header[5]);
    uint64_t count = 0;
    in.read(reinterpret_cast<char*>(&count), 8);
    for (uint64_t n = 0; n < count; ++n) {
      VoxelKey key;
      VoxelCell cell;
      uint8_t rgb[3];
      in.read(reinterpret_cast<char*>(&key.i), 4);
      in.read(reinterpret_cast<char*>(&key.j), 4);
      in.read(reinterpret_cast<char*>(&key.k), 4);
      in.read(reinterpret_cast<char*>(&cell.log_odds), 4);
      in.read(reinterpret_cast<char*>(rgb), 3);
      in.read(reinterpret_cast<char*>(&cell.color_count), 4);
      in.read(reinterpret_cast<char*>(cell.histogram.data()), kLabelCount * 4);
      if (!in) throw ParseError(path, "truncated snapshot at cell " + std::to_string(n));
      cell.color_mean = {double(rgb[0]), double(rgb[1]), double(rgb[2])};
      grid.cells_[key] = cell;
    }
    return grid;
  }

  enum class ExportMode { ColorMap, MaterialMap };

  /// One PLY vertex per occupied cell at the cell center. Color mode uses
  /// the running color mean; material mode uses the database palette, with
  /// gray for cells that never received a material estimate.
  void export_map(ExportMode mode, const std::string& path, const MaterialDb& db,
                  bool binary = true) const {
    const Color gray{128, 128, 128};
    std::vector<Vec3> xyz;
    std::vector<Color> rgb;
    for (const VoxelKey& key : sorted_keys()) {
      const VoxelCell& c = cells_.at(key);
      if (!occupied(c)) continue;
      xyz.push_back(key.center(resolution_));
      if (mode == ExportMode::ColorMap) {
        rgb.push_back(c.color_count == 0
                          ? gray
                          : Color{uint8_t(std::lround(c.color_mean[0])),
                                  uint8_t(std::lround(c.color_mean[1])),
                                  uint8_t(std::lround(c.color_mean[2]))});
      } else {
        auto m = cell_material(c);
        rgb.push_back(m ? db.palette_color(*m) : gray);
      }
    }
    std::ostringstream comment;
    comment << "acmap " << (mode == ExportMode::ColorMap ? "color" : "material")
            << " map, resolution " << resolution_;
    ply::write(path, xyz, rgb, binary, {comment.str()});
  }

private:
  void bump_log_odds(VoxelCell& c, double delta) {
    c.log_odds = float(std::clamp(double(c.log_odds) + delta, l_min_, l_max_));
  }

  double resolution_;
  double l_hit_, l_miss_, l_min_, l_max_, p_occ_;
  bool ray_carving_ = true;
  double max_ray_range_ = 8.0;
  std::unordered_map<VoxelKey, VoxelCell, VoxelKeyHash> cells_;
};

inline std::string format_map_stats(const MapStats& s, const MaterialDb* db = nullptr) {
  std::ostringstream out;
  out << "cells: " << s.cells << "\n";
  out << "occupied: " << s.occupied << "\n";
  out << "free: " << s.free << "\n";
  out << "memory_bytes: " << s.memory_bytes << "\n";
  out << "bounds_min: " << s.min_key.i << " " << s.min_key.j << " " << s.min_key.k << "\n";
  out << "bounds_max: " << s.max_key.i << " " << s.max_key.j << " " << s.max_key.k << "\n";
  for (int m = 0; m < kLabelCount; ++m) {
    if (s.material_cells[size_t(m)] == 0) continue;
    out << "material[";
    if (db && size_t(m) < db->size()) out << db->material(uint8_t(m)).name;
    else out << m;
    out << "]: " << s.material_cells[size_t(m)] << "\n";
  }
  return out.str();
}

}  // namespace acmap
