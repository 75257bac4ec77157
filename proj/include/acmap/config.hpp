#pragma once

#include "acmap/kv.hpp"
#include "acmap/material.hpp"
#include "acmap/projection.hpp"
#include "acmap/segmentation.hpp"
#include "acmap/types.hpp"
#include "acmap/voxelmap.hpp"

#include <filesystem>
#include <string>

namespace acmap {

enum class LabelSource { External, Synthetic, SyntheticNoise };

inline LabelSource label_source_from_string(const std::string& s) {
  if (s == "external") return LabelSource::External;
  if (s == "synthetic") return LabelSource::Synthetic;
  if (s == "synthetic-noise") return LabelSource::SyntheticNoise;
  throw ValidationError("unknown label source '" + s +
                        "' (expected external | synthetic | synthetic-noise)");
}

/// Everything the pipeline needs; one shipped config file carries the
/// defaults and CLI flags override individual fields.
struct PipelineConfig {
  CameraModel camera;

  int holefill_kernel = 5;
  int holefill_max_iters = 8;

  bool crf_enabled = true;
  CrfParams crf;

  double grid_resolution = 0.1;
  double l_hit = 0.85;
  double l_miss = -0.4;
  double l_min = -2.0;
  double l_max = 3.5;
  double p_occ = 0.97;
  bool ray_carving = true;
  double max_ray_range = 8.0;

  std::string materials_path = "data/materials.txt";
  std::string matching_path = "data/matching.txt";
  std::string label_remap_path;  // optional, applied to external label maps

  LabelSource label_source = LabelSource::External;
  std::string labels_dir;        // external label maps, one per frame
  double label_noise_p = 0.3;    // synthetic-noise corruption probability
  uint64_t seed = 1337;

  bool single_thread = false;
  std::string dump_dir;          // per-frame reconstructed-image debug dumps

  void validate() const {
    camera.validate();
    if (holefill_kernel < 3 || holefill_kernel % 2 == 0)
      throw ValidationError("hole-fill kernel must be odd and >= 3");
    if (holefill_max_iters < 0)
      throw ValidationError("hole-fill max_iters must be >= 0");
    crf.validate();
    // grid constants checked by the OccupancyGrid constructor
    OccupancyGrid probe(grid_resolution, l_hit, l_miss, l_min, l_max, p_occ);
    (void)probe;
    if (max_ray_range <= 0.0) throw ValidationError("max ray range must be > 0");
    if (!(label_noise_p >= 0.0 && label_noise_p < 0.5))
      throw ValidationError("label noise probability must be in [0, 0.5)");
    if (!std::filesystem::exists(materials_path))
      throw ValidationError("material database '" + materials_path + "' does not exist");
    if (!std::filesystem::exists(matching_path))
      throw ValidationError("matching table '" + matching_path + "' does not exist");
    if (!label_remap_path.empty() && !std::filesystem::exists(label_remap_path))
      throw ValidationError("label remap '" + label_remap_path + "' does not exist");
    if (label_source == LabelSource::External && !labels_dir.empty() &&
        !std::filesystem::exists(labels_dir))
      throw ValidationError("label directory '" + labels_dir + "' does not exist");
  }

  OccupancyGrid make_grid() const {
    OccupancyGrid grid(grid_resolution, l_hit, l_miss, l_min, l_max, p_occ);
    grid.set_ray_carving(ray_carving);
    grid.set_max_ray_range(max_ray_range);
    return grid;
  }

  static PipelineConfig load(const std::string& path) {
    KvFile kv = KvFile::parse(path);
    kv.restrict_keys({
        "camera.width", "camera.height", "camera.focal_px", "camera.cx", "camera.cy",
        "camera.metres_to_px", "holefill.kernel", "holefill.max_iters", "crf.enabled",
        "crf.w_app", "crf.theta_pos", "crf.theta_lab", "crf.w_smooth", "crf.theta_smooth",
        "crf.iterations", "crf.confidence", "crf.downsample", "grid.resolution",
        "grid.l_hit", "grid.l_miss", "grid.l_min", "grid.l_max", "grid.p_occ",
        "grid.ray_carving", "grid.max_ray_range", "materials", "matching", "label_remap",
        "labels.source", "labels.dir", "labels.noise_p", "labels.seed",
        "pipeline.single_thread", "debug.dump_dir",
    });
    PipelineConfig c;
    c.camera.width = kv.get_int("camera.width", c.camera.width);
    c.camera.height = kv.get_int("camera.height", c.camera.height);
    c.camera.focal_px = kv.get_double("camera.focal_px", c.camera.focal_px);
    c.camera.cx = kv.get_double("camera.cx", c.camera.cx);
    c.camera.cy = kv.get_double("camera.cy", c.camera.cy);
    c.camera.metres_to_px = kv.get_double("camera.metres_to_px", c.camera.metres_to_px);
    c.holefill_kernel = kv.get_int("holefill.kernel", c.holefill_kernel);
    c.holefill_max_iters = kv.get_int("holefill.max_iters", c.holefill_max_iters);
    c.crf_enabled = kv.get_bool("crf.enabled", c.crf_enabled);
    c.crf.w_app = kv.get_double("crf.w_app", c.crf.w_app);
    c.crf.theta_pos = kv.get_double("crf.theta_pos", c.crf.theta_pos);
    c.crf.theta_lab = kv.get_double("crf.theta_lab", c.crf.theta_lab);
    c.crf.w_smooth = kv.get_double("crf.w_smooth", c.crf.w_smooth);
    c.crf.theta_smooth = kv.get_double("crf.theta_smooth", c.crf.theta_smooth);
    c.crf.iterations = kv.get_int("crf.iterations", c.crf.iterations);
    c.crf.confidence = kv.get_double("crf.confidence", c.crf.confidence);
    c.crf.downsample = kv.get_int("crf.downsample", c.crf.downsample);
    c.grid_resolution = kv.get_double("grid.resolution", c.grid_resolution);
    c.l_hit = kv.get_double("grid.l_hit", c.l_hit);
    c.l_miss = kv.get_double("grid.l_miss", c.l_miss);
    c.l_min = kv.get_double("grid.l_min", c.l_min);
    c.l_max = kv.get_double("grid.l_max", c.l_max);
    c.p_occ = kv.get_double("grid.p_occ", c.p_occ);
    c.ray_carving = kv.get_bool("grid.ray_carving", c.ray_carving);
    c.max_ray_range = kv.get_double("grid.max_ray_range", c.max_ray_range);
    c.materials_path = kv.get_string("materials", c.materials_path);
    c.matching_path = kv.get_string("matching", c.matching_path);
    c.label_remap_path = kv.get_string("label_remap", c.label_remap_path);
    c.label_source = label_source_from_string(kv.get_string("labels.source", "external"));
    c.labels_dir = kv.get_string("labels.dir", c.labels_dir);
    c.label_noise_p = kv.get_double("labels.noise_p", c.label_noise_p);
    c.seed = uint64_t(kv.get_double("labels.seed", double(c.seed)));
    c.single_thread = kv.get_bool("pipeline.single_thread", c.single_thread);
    c.dump_dir = kv.get_string("debug.dump_dir", c.dump_dir);
    return c;
  }
};

}  // namespace acmap
