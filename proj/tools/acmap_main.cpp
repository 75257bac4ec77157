#include "acmap/config.hpp"
#include "acmap/pipeline.hpp"
#include "acmap/segmentation.hpp"
#include "acmap/synthetic.hpp"
#include "acmap/voxelmap.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

namespace {

using namespace acmap;

struct SyntheticArgs {
  std::string scene_path;
  std::string sensor_path;
  std::string waypoints_path;
  int frames_per_segment = 25;
  double rate_hz = 30.0;
};

void add_synthetic_options(CLI::App* cmd, SyntheticArgs& args, bool required) {
  auto* s = cmd->add_option("--scene", args.scene_path, "scene config file");
  auto* k = cmd->add_option("--sensor", args.sensor_path, "sensor config file");
  auto* w = cmd->add_option("--waypoints", args.waypoints_path,
                            "waypoint file: 'x y yaw_deg' per line");
  cmd->add_option("--frames-per-segment", args.frames_per_segment,
                  "trajectory frames per waypoint segment");
  cmd->add_option("--rate", args.rate_hz, "frame rate used for timestamps, Hz");
  if (required) {
    s->required();
    k->required();
    w->required();
  }
}

/// Flags land here as optionals and are applied over the config file, so a
/// flag the user did not pass never clobbers a file value.
struct Overrides {
  std::optional<std::string> materials, matching, label_remap, labels_dir, label_source,
      dump_dir;
  std::optional<double> noise_p, resolution, max_ray_range, confidence;
  std::optional<uint64_t> seed;
  std::optional<bool> single_thread, crf_enabled, ray_carving;
  std::optional<int> crf_iterations, crf_downsample, holefill_kernel, holefill_iters;

  void apply(PipelineConfig& cfg) const {
    if (materials) cfg.materials_path = *materials;
    if (matching) cfg.matching_path = *matching;
    if (label_remap) cfg.label_remap_path = *label_remap;
    if (labels_dir) cfg.labels_dir = *labels_dir;
    if (label_source) cfg.label_source = label_source_from_string(*label_source);
    if (dump_dir) cfg.dump_dir = *dump_dir;
    if (noise_p) cfg.label_noise_p = *noise_p;
    if (resolution) cfg.grid_resolution = *resolution;
    if (max_ray_range) cfg.max_ray_range = *max_ray_range;
    if (confidence) cfg.crf.confidence = *confidence;
    if (seed) cfg.seed = *seed;
    if (single_thread) cfg.single_thread = *single_thread;
    if (crf_enabled) cfg.crf_enabled = *crf_enabled;
    if (ray_carving) cfg.ray_carving = *ray_carving;
    if (crf_iterations) cfg.crf.iterations = *crf_iterations;
    if (crf_downsample) cfg.crf.downsample = *crf_downsample;
    if (holefill_kernel) cfg.holefill_kernel = *holefill_kernel;
    if (holefill_iters) cfg.holefill_max_iters = *holefill_iters;
  }
};

void add_override_options(CLI::App* cmd, Overrides& ov) {
  cmd->add_option("--materials", ov.materials, "material database file");
  cmd->add_option("--matching", ov.matching, "label->material matching table");
  cmd->add_option("--label-remap", ov.label_remap, "external-id remap file");
  cmd->add_option("--labels-dir", ov.labels_dir, "directory of per-frame label maps");
  cmd->add_option("--label-source", ov.label_source,
                  "external | synthetic | synthetic-noise")
      ->check(CLI::IsMember({"external", "synthetic", "synthetic-noise"}));
  cmd->add_option("--noise-p", ov.noise_p, "synthetic-noise corruption probability");
  cmd->add_option("--dump-dir", ov.dump_dir,
                  "write per-frame reconstructed-image debug dumps here");
  cmd->add_option("--seed", ov.seed, "pipeline random seed");
  cmd->add_option("--resolution", ov.resolution, "voxel resolution, metres");
  cmd->add_option("--max-ray-range", ov.max_ray_range, "free-space carving range cap");
  cmd->add_flag("--single-thread{true},--pipelined{false}", ov.single_thread,
                "disable the frame-lookahead pipeline");
  cmd->add_flag("--crf{true},--no-crf{false}", ov.crf_enabled,
                "toggle dense CRF refinement");
  cmd->add_flag("--ray-carving{true},--no-ray-carving{false}", ov.ray_carving,
                "toggle free-space ray updates");
  cmd->add_option("--crf-iterations", ov.crf_iterations, "mean-field iterations");
  cmd->add_option("--crf-downsample", ov.crf_downsample, "CRF grid subsample (1, 2, 4)");
  cmd->add_option("--confidence", ov.confidence, "unary confidence in (0, 1)");
  cmd->add_option("--holefill-kernel", ov.holefill_kernel, "mean-filter window, odd");
  cmd->add_option("--holefill-iters", ov.holefill_iters, "max fill passes");
}

std::unique_ptr<SyntheticFrameSource> make_synthetic_source(const SyntheticArgs& args,
                                                            uint64_t seed) {
  if (args.scene_path.empty() || args.sensor_path.empty() || args.waypoints_path.empty())
    throw ValidationError("--synthetic needs --scene, --sensor and --waypoints");
  synth::SceneSpec scene = synth::load_scene(args.scene_path);
  synth::SensorSpec sensor = synth::load_sensor(args.sensor_path);
  auto waypoints = synth::load_waypoints(args.waypoints_path);
  Trajectory traj = synth::generate_trajectory(scene, waypoints, args.frames_per_segment,
                                               sensor.height, 1.0 / args.rate_hz);
  return std::make_unique<SyntheticFrameSource>(scene, sensor, traj, seed);
}

int cmd_simulate(const SyntheticArgs& args, const std::string& out_dir, uint64_t seed,
                 const std::string& format) {
  synth::SceneSpec scene = synth::load_scene(args.scene_path);
  synth::SensorSpec sensor = synth::load_sensor(args.sensor_path);
  auto waypoints = synth::load_waypoints(args.waypoints_path);
  if (waypoints.empty()) throw ValidationError("waypoint file is empty");
  Trajectory traj = synth::generate_trajectory(scene, waypoints, args.frames_per_segment,
                                               sensor.height, 1.0 / args.rate_hz);

  std::filesystem::create_directories(out_dir);
  save_trajectory(traj, out_dir + "/trajectory.txt");
  char name[64];
  for (size_t i = 0; i < traj.size(); ++i) {
    const auto& e = traj.entries()[i];
    auto [frame, labels] = synth::render_frame(
        scene, sensor, e.pose, SyntheticFrameSource::frame_seed(seed, i), e.timestamp);
    if (sensor.label_noise_p > 0.0)
      labels = synth::corrupt_labels(labels, sensor.label_noise_p,
                                     SyntheticFrameSource::frame_seed(seed, i) ^
                                         0xc2b2ae3d27d4eb4full);
    std::snprintf(name, sizeof(name), "frame_%06zu", i);
    const std::string stem = out_dir + "/" + name;
    if (format == "pcd") {
      std::vector<Vec3> xyz;
      std::vector<Color> rgb;
      for (const auto& p : frame.points) {
        xyz.push_back(p.p);
        rgb.push_back(p.color);
      }
      char ts[64];
      std::snprintf(ts, sizeof(ts), "timestamp %.9f", frame.timestamp);
      pcd::write(stem + ".pcd", xyz, rgb, true, {ts});
    } else {
      write_frame(frame, stem + ".ply", format != "ply-ascii");
    }
    synth::save_labels(labels, stem + ".labels");
  }
  std::cout << "wrote " << traj.size() << " frames to " << out_dir << "\n";
  return 0;
}

std::string derive_export_path(const std::string& map_path, const char* suffix) {
  std::filesystem::path p(map_path);
  p.replace_extension();
  return p.string() + suffix;
}

int run_build_or_bench(PipelineConfig& cfg, FrameSource& source, const std::string& out_map,
                       const std::string& export_color, const std::string& export_material,
                       bool bench_only) {
  OccupancyGrid grid = cfg.make_grid();
  BuildReport report = build_map(cfg, source, grid);
  if (report.frames == 0)
    std::cerr << "warning: frame source produced no frames; map is empty\n";

  std::cout << report.summary();
  if (bench_only) {
    if (report.frames < 50)
      std::cerr << "note: only " << report.frames
                << " frames benchmarked; percentiles stabilize from ~50 frames\n";
    return 0;
  }

  MaterialDb db = load_material_database(cfg.materials_path);
  if (!out_map.empty()) {
    grid.save_snapshot(out_map);
    std::cout << "map snapshot: " << out_map << "\n";
  }
  const std::string color_path =
      !export_color.empty() ? export_color
                            : (out_map.empty() ? "" : derive_export_path(out_map, "_color.ply"));
  const std::string material_path =
      !export_material.empty()
          ? export_material
          : (out_map.empty() ? "" : derive_export_path(out_map, "_material.ply"));
  if (!color_path.empty()) {
    grid.export_map(OccupancyGrid::ExportMode::ColorMap, color_path, db);
    std::cout << "color map: " << color_path << "\n";
  }
  if (!material_path.empty()) {
    grid.export_map(OccupancyGrid::ExportMode::MaterialMap, material_path, db);
    std::cout << "material map: " << material_path << "\n";
  }
  std::cout << format_map_stats(grid.stats(), &db);
  return 0;
}

int cmd_crf_refine(const std::string& image_path, const std::string& labels_path,
                   const std::string& out_path, const std::string& probs_path,
                   const PipelineConfig& cfg) {
  Image<Color> colors;
  if (image_path.size() > 4 && image_path.substr(image_path.size() - 4) == ".png")
    colors = imgio::read_png_rgb(image_path);
  else
    colors = imgio::read_ppm(image_path);

  std::optional<LabelRemap> remap;
  if (!cfg.label_remap_path.empty()) remap = load_label_remap(cfg.label_remap_path);
  LabelField hard = load_label_map(labels_path, colors.width(), colors.height(),
                                   remap ? &*remap : nullptr);
  LabelField unary = unary_from_labels(hard, cfg.crf.confidence);
  LabelField refined = densecrf_refine(unary, colors, cfg.crf, cfg.single_thread ? 1 : 0);
  if (!out_path.empty()) save_label_map(argmax_map(refined), out_path);
  if (!probs_path.empty()) save_prob_tensor(refined, probs_path);
  return 0;
}

struct PipelineCmdArgs {
  std::string config_path;
  std::string frames_dir;
  std::string trajectory_path;
  bool use_synthetic = false;
  SyntheticArgs synth;
  Overrides overrides;
};

void add_pipeline_cmd(CLI::App* cmd, PipelineCmdArgs& a) {
  cmd->add_option("--config", a.config_path, "pipeline config file");
  cmd->add_option("--frames", a.frames_dir, "directory of .ply/.pcd frames");
  cmd->add_option("--trajectory", a.trajectory_path, "trajectory file for --frames");
  cmd->add_flag("--synthetic", a.use_synthetic, "render frames instead of reading them");
  add_synthetic_options(cmd, a.synth, false);
  add_override_options(cmd, a.overrides);
}

int execute_pipeline(PipelineCmdArgs& a, bool bench_only, const std::string& map_out,
                     const std::string& exp_color, const std::string& exp_material) {
  PipelineConfig cfg =
      a.config_path.empty() ? PipelineConfig{} : PipelineConfig::load(a.config_path);
  a.overrides.apply(cfg);

  std::unique_ptr<FrameSource> source;
  if (a.use_synthetic) {
    if (cfg.label_source == LabelSource::External && !a.overrides.label_source)
      cfg.label_source = LabelSource::Synthetic;
    source = make_synthetic_source(a.synth, cfg.seed);
  } else {
    if (a.frames_dir.empty()) throw ValidationError("need --frames DIR or --synthetic");
    source = std::make_unique<DirectoryFrameSource>(a.frames_dir, a.trajectory_path, cfg);
  }
  return run_build_or_bench(cfg, *source, map_out, exp_color, exp_material, bench_only);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acmap: real-time occupancy mapping with per-voxel acoustic materials"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("simulate", "render synthetic frames + ground truth");
  SyntheticArgs sim_args;
  std::string sim_out;
  uint64_t sim_seed = 1337;
  std::string sim_format = "ply";
  add_synthetic_options(sim, sim_args, true);
  sim->add_option("--out", sim_out, "output directory")->required();
  sim->add_option("--seed", sim_seed, "render seed");
  sim->add_option("--format", sim_format, "ply | ply-ascii | pcd")
      ->check(CLI::IsMember({"ply", "ply-ascii", "pcd"}));

  auto* build = app.add_subcommand("build-map", "run the full pipeline into a voxel map");
  PipelineCmdArgs build_args;
  std::string out_map = "map.acsnap";
  std::string export_color, export_material;
  build->add_option("--out", out_map, "map snapshot output path");
  build->add_option("--export-color", export_color, "also export a color PLY");
  build->add_option("--export-material", export_material, "also export a material PLY");
  add_pipeline_cmd(build, build_args);

  auto* bench = app.add_subcommand("bench", "run the pipeline and report stage timings");
  PipelineCmdArgs bench_args;
  add_pipeline_cmd(bench, bench_args);

  auto* exp = app.add_subcommand("export", "map snapshot -> PLY");
  std::string exp_map, exp_out, exp_mode = "color";
  std::string exp_materials = "data/materials.txt";
  exp->add_option("--map", exp_map, "map snapshot")->required();
  exp->add_option("--out", exp_out, "output PLY")->required();
  exp->add_option("--mode", exp_mode, "color | material")
      ->check(CLI::IsMember({"color", "material"}));
  exp->add_option("--materials", exp_materials, "material database (palette source)");

  auto* st = app.add_subcommand("stats", "print map snapshot statistics");
  std::string st_map, st_materials = "data/materials.txt";
  st->add_option("--map", st_map, "map snapshot")->required();
  st->add_option("--materials", st_materials, "material database for names");

  auto* crf = app.add_subcommand("crf-refine", "refine a label map against an image");
  std::string crf_image, crf_labels, crf_out, crf_probs, crf_config;
  Overrides crf_overrides;
  crf->add_option("--image", crf_image, "color image (.ppm or .png)")->required();
  crf->add_option("--labels", crf_labels, "hard label map (.pgm or .png)")->required();
  crf->add_option("--out", crf_out, "refined label map output");
  crf->add_option("--probs", crf_probs, "refined probability tensor output");
  crf->add_option("--config", crf_config, "pipeline config file");
  add_override_options(crf, crf_overrides);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(sim_args, sim_out, sim_seed, sim_format);
    if (build->parsed())
      return execute_pipeline(build_args, false, out_map, export_color, export_material);
    if (bench->parsed()) return execute_pipeline(bench_args, true, "", "", "");
    if (exp->parsed()) {
      OccupancyGrid grid = OccupancyGrid::load_snapshot(exp_map);
      MaterialDb db = load_material_database(exp_materials);
      grid.export_map(exp_mode == "color" ? OccupancyGrid::ExportMode::ColorMap
                                          : OccupancyGrid::ExportMode::MaterialMap,
                      exp_out, db);
      return 0;
    }
    if (st->parsed()) {
      OccupancyGrid grid = OccupancyGrid::load_snapshot(st_map);
      std::optional<MaterialDb> db;
      if (std::filesystem::exists(st_materials))
        db = load_material_database(st_materials);
      std::cout << format_map_stats(grid.stats(), db ? &*db : nullptr);
      return 0;
    }
    if (crf->parsed()) {
      PipelineConfig cfg =
          crf_config.empty() ? PipelineConfig{} : PipelineConfig::load(crf_config);
      crf_overrides.apply(cfg);
      return cmd_crf_refine(crf_image, crf_labels, crf_out, crf_probs, cfg);
    }
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
