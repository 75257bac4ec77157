#include "acmap/pipeline.hpp"

#include "acmap/config.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <filesystem>

using namespace acmap;
using testutil::TempDir;
using testutil::write_text;

namespace {

PipelineConfig test_config() {
  PipelineConfig cfg;
  cfg.materials_path = std::string(testutil::kDataDir) + "/materials.txt";
  cfg.matching_path = std::string(testutil::kDataDir) + "/matching.txt";
  cfg.label_source = LabelSource::Synthetic;
  cfg.crf_enabled = false;
  // small image keeps unit tests fast; acceptance runs the full size
  cfg.camera.width = 160;
  cfg.camera.height = 120;
  cfg.camera.focal_px = 131.25;
  cfg.camera.cx = 79.5;
  cfg.camera.cy = 59.5;
  return cfg;
}

synth::SceneSpec wall_scene() {
  synth::SceneSpec scene;
  scene.extents = Vec3(6.0, 6.0, 2.5);
  return scene;
}

SyntheticFrameSource wall_source(int frames, int points, uint64_t seed) {
  synth::SensorSpec sensor;
  sensor.points_per_frame = points;
  sensor.depth_noise_std = 0.0;
  // 1.2 m from the +x wall, looking straight at it: the FOV sees wall only
  std::vector<synth::Waypoint> wp = {{4.8, 3.0, 0.0}};
  Trajectory traj = synth::generate_trajectory(wall_scene(), wp, frames, 1.25);
  return SyntheticFrameSource(wall_scene(), sensor, traj, seed);
}

}  // namespace

TEST_CASE("single wall frame with perfect labels maps every occupied cell to Concrete") {
  PipelineConfig cfg = test_config();
  // one hit must cross the occupancy threshold for this single-frame check
  cfg.l_hit = 4.0;
  cfg.p_occ = 0.95;
  SyntheticFrameSource source = wall_source(1, 4000, 42);
  OccupancyGrid grid = cfg.make_grid();
  BuildReport report = build_map(cfg, source, grid);
  CHECK(report.frames == 1);
  REQUIRE(grid.cell_count() > 0);

  MaterialDb db = load_material_database(cfg.materials_path);
  const uint8_t concrete = *db.find("Concrete");
  size_t occupied = 0;
  for (const auto& [key, cell] : grid.cells()) {
    if (!grid.occupied(cell)) continue;
    ++occupied;
    CHECK(grid.query_material(key) == concrete);
  }
  CHECK(occupied > 0);
}

TEST_CASE("zero frames produce an empty map and an empty report") {
  PipelineConfig cfg = test_config();
  synth::SensorSpec sensor;
  Trajectory empty_traj;
  SyntheticFrameSource source(wall_scene(), sensor, empty_traj, 1);
  OccupancyGrid grid = cfg.make_grid();
  BuildReport report = build_map(cfg, source, grid);
  CHECK(report.frames == 0);
  CHECK(grid.cell_count() == 0);
}

TEST_CASE("missing pose aborts naming the frame timestamp") {
  TempDir tmp("frames");
  PipelineConfig cfg = test_config();
  SyntheticFrameSource source = wall_source(2, 200, 7);
  // write both frames + sidecars, but a trajectory that only covers frame 0
  for (size_t i = 0; i < source.count(); ++i) {
    FrameJob job = source.get(i);
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%02zu.ply", i);
    write_frame(job.frame, tmp.file(name));
    synth::save_labels(job.gt_labels, tmp.file(std::string(name).substr(0, 8) + ".labels"));
  }
  Trajectory partial;
  partial.add(source.trajectory().entries()[0].timestamp,
              source.trajectory().entries()[0].pose);
  save_trajectory(partial, tmp.file("traj.txt"));

  DirectoryFrameSource dir_source(tmp.path().string(), tmp.file("traj.txt"), cfg);
  OccupancyGrid grid = cfg.make_grid();
  CHECK_THROWS_WITH_AS(build_map(cfg, dir_source, grid), doctest::Contains("no pose"),
                       ValidationError);
}

TEST_CASE("pipeline is deterministic and thread mode does not change the bytes") {
  TempDir tmp("det");
  PipelineConfig cfg = test_config();
  cfg.label_source = LabelSource::SyntheticNoise;
  cfg.label_noise_p = 0.25;

  auto run = [&](bool single_thread, const std::string& out) {
    PipelineConfig c = cfg;
    c.single_thread = single_thread;
    SyntheticFrameSource source = wall_source(4, 1500, 99);
    OccupancyGrid grid = c.make_grid();
    build_map(c, source, grid);
    grid.save_snapshot(out);
  };
  run(false, tmp.file("a.acsnap"));
  run(false, tmp.file("b.acsnap"));
  run(true, tmp.file("c.acsnap"));
  const std::string a = testutil::read_bytes(tmp.file("a.acsnap"));
  CHECK(a == testutil::read_bytes(tmp.file("b.acsnap")));
  CHECK(a == testutil::read_bytes(tmp.file("c.acsnap")));
  CHECK(!a.empty());
}

TEST_CASE("CRF off equals a unary pass-through (T = 0)") {
  TempDir tmp("crfoff");
  PipelineConfig cfg = test_config();

  auto run = [&](bool crf_on, int iterations, const std::string& out) {
    PipelineConfig c = cfg;
    c.crf_enabled = crf_on;
    c.crf.iterations = iterations;
    SyntheticFrameSource source = wall_source(3, 1000, 11);
    OccupancyGrid grid = c.make_grid();
    build_map(c, source, grid);
    grid.save_snapshot(out);
  };
  run(false, 10, tmp.file("off.acsnap"));
  run(true, 0, tmp.file("t0.acsnap"));
  CHECK(testutil::read_bytes(tmp.file("off.acsnap")) ==
        testutil::read_bytes(tmp.file("t0.acsnap")));
}

TEST_CASE("directory source with external label maps matches the synthetic route") {
  TempDir tmp("ext");
  PipelineConfig cfg = test_config();
  cfg.l_hit = 4.0;  // one frame must reach occupancy for the material check
  cfg.p_occ = 0.95;

  // render one frame, write it to disk, and save its rasterized truth as an
  // external label map
  SyntheticFrameSource source = wall_source(1, 1200, 21);
  FrameJob job = source.get(0);
  write_frame(job.frame, tmp.file("frame_000000.ply"));
  synth::save_labels(job.gt_labels, tmp.file("frame_000000.labels"));
  save_trajectory(source.trajectory(), tmp.file("traj.txt"));

  ReconstructedImage img = project_frame(job.frame, cfg.camera);
  Image<uint8_t> ids(img.width(), img.height(), uint8_t(SemanticLabel::Unknown));
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      if (img.point_index.at(x, y) != kNoPoint)
        ids.at(x, y) = uint8_t(job.gt_labels[img.point_index.at(x, y)]);
  std::filesystem::create_directories(tmp.file("labels"));
  imgio::write_pgm(ids, tmp.file("labels/frame_000000.pgm"));

  // synthetic route
  OccupancyGrid grid_syn = cfg.make_grid();
  {
    SyntheticFrameSource s2 = wall_source(1, 1200, 21);
    build_map(cfg, s2, grid_syn);
    grid_syn.save_snapshot(tmp.file("syn.acsnap"));
  }

  // external route over the same frame file
  PipelineConfig ext_cfg = cfg;
  ext_cfg.label_source = LabelSource::External;
  ext_cfg.labels_dir = tmp.file("labels");
  DirectoryFrameSource dir_source(tmp.path().string(), tmp.file("traj.txt"), ext_cfg);
  OccupancyGrid grid_ext = ext_cfg.make_grid();
  build_map(ext_cfg, dir_source, grid_ext);

  // same cells, same materials (file round trip narrows coordinates to f32,
  // so histograms can shift by a point at most; require identical argmax)
  CHECK(grid_ext.cell_count() == grid_syn.cell_count());
  size_t checked = 0;
  for (const auto& [key, cell] : grid_syn.cells()) {
    if (!grid_syn.occupied(cell)) continue;
    if (grid_ext.cell(key) == nullptr) continue;
    CHECK(grid_ext.query_material(key) == grid_syn.query_material(key));
    ++checked;
  }
  CHECK(checked > 0);
}

TEST_CASE("debug dumps are written per frame when requested") {
  TempDir tmp("dump");
  PipelineConfig cfg = test_config();
  cfg.dump_dir = tmp.file("dumps");
  SyntheticFrameSource source = wall_source(2, 300, 3);
  OccupancyGrid grid = cfg.make_grid();
  build_map(cfg, source, grid);
  for (const char* name : {"dumps/frame_000000.png", "dumps/frame_000000_depth.pgm",
                           "dumps/frame_000001.corr"})
    CHECK(std::filesystem::exists(tmp.file(name)));
  const std::string corr = testutil::read_bytes(tmp.file("dumps/frame_000000.corr"));
  CHECK(corr.size() == size_t(cfg.camera.width) * size_t(cfg.camera.height) * 4);
}

TEST_CASE("stage timings are collected per frame") {
  PipelineConfig cfg = test_config();
  SyntheticFrameSource source = wall_source(3, 500, 5);
  OccupancyGrid grid = cfg.make_grid();
  BuildReport report = build_map(cfg, source, grid);
  REQUIRE(report.timings.size() == 3);
  for (const auto& t : report.timings) {
    CHECK(t.project_ms >= 0.0);
    CHECK(t.crf_ms >= 0.0);  // crf off: still a (zero-ish) stage sample
    CHECK(t.total_ms() >= 0.0);
  }
  CHECK(report.summary().find("project") != std::string::npos);
}

TEST_CASE("pipeline config file round trip with overrides") {
  TempDir tmp("cfg");
  write_text(tmp.file("p.cfg"),
             "camera.width = 320\ncamera.height = 240\ncamera.cx = 159.5\n"
             "camera.cy = 119.5\ncrf.enabled = false\ngrid.resolution = 0.2\n"
             "materials = " + std::string(testutil::kDataDir) + "/materials.txt\n" +
             "matching = " + std::string(testutil::kDataDir) + "/matching.txt\n" +
             "labels.source = synthetic\n");
  PipelineConfig cfg = PipelineConfig::load(tmp.file("p.cfg"));
  CHECK(cfg.camera.width == 320);
  CHECK(cfg.crf_enabled == false);
  CHECK(cfg.grid_resolution == doctest::Approx(0.2));
  CHECK(cfg.label_source == LabelSource::Synthetic);
  CHECK_NOTHROW(cfg.validate());

  write_text(tmp.file("typo.cfg"), "camera.widht = 320\n");
  CHECK_THROWS_AS(PipelineConfig::load(tmp.file("typo.cfg")), ParseError);

  PipelineConfig missing = cfg;
  missing.materials_path = tmp.file("nope.txt");
  CHECK_THROWS_AS(missing.validate(), ValidationError);
}

TEST_CASE("shipped default config parses and validates from the repo root") {
  // data paths inside the file are repo-root relative
  const std::string cfg_path = std::string(testutil::kDataDir) + "/default.cfg";
  PipelineConfig cfg = PipelineConfig::load(cfg_path);
  cfg.materials_path = std::string(testutil::kDataDir) + "/materials.txt";
  cfg.matching_path = std::string(testutil::kDataDir) + "/matching.txt";
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.camera.focal_px == doctest::Approx(525.0));
  CHECK(cfg.grid_resolution == doctest::Approx(0.1));
  CHECK(cfg.l_hit == doctest::Approx(0.85));
  CHECK(cfg.l_miss == doctest::Approx(-0.4));
  CHECK(cfg.crf.w_app == doctest::Approx(4.0));
  CHECK(cfg.crf.iterations == 10);
}
