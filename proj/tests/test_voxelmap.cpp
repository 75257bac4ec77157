#include "acmap/voxelmap.hpp"

#include "acmap/material.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>

using namespace acmap;
using testutil::TempDir;

namespace {

const std::string kMaterials = std::string(testutil::kDataDir) + "/materials.txt";

LabeledPoint lp(double x, double y, double z, uint8_t material,
                Color color = Color{100, 100, 100}) {
  return LabeledPoint{Vec3(x, y, z), color, material};
}

// grid where a single hit crosses the occupancy threshold; convenient for
// material queries
OccupancyGrid sensitive_grid(double res = 0.5) {
  return OccupancyGrid(res, 1.0, -0.4, -2.0, 3.5, 0.6);
}

/// Brute-force mode over an insertion log: recount and re-apply the
/// lowest-id tie-break, independent of the grid internals.
std::optional<uint8_t> brute_force_mode(const std::vector<LabeledPoint>& log,
                                        const VoxelKey& key, double res) {
  std::array<uint64_t, kLabelCount> counts{};
  for (const auto& p : log)
    if (VoxelKey::from_point(p.p, res) == key) ++counts[p.material];
  uint64_t best = 0;
  int best_id = -1;
  for (int m = 0; m < kKnownLabelCount; ++m)
    if (counts[m] > best) {
      best = counts[m];
      best_id = m;
    }
  if (best_id >= 0) return uint8_t(best_id);
  if (counts[kKnownLabelCount] > 0) return uint8_t(kKnownLabelCount);
  return std::nullopt;
}

}  // namespace

TEST_CASE("voxel keys use the floor convention") {
  CHECK(VoxelKey::from_point(Vec3(0.05, 0.0, 0.0), 0.1) == VoxelKey{0, 0, 0});
  CHECK(VoxelKey::from_point(Vec3(-0.05, 0.25, 0.1), 0.1) == VoxelKey{-1, 2, 1});
  CHECK(VoxelKey{2, 0, -1}.center(0.1) == Vec3(0.25, 0.05, -0.05));
}

TEST_CASE("a single point creates one hit cell with the shipped l_hit") {
  OccupancyGrid grid;  // shipped defaults: l_hit 0.85
  UpdateStats s = grid.insert_labeled_frame({lp(1.02, 2.33, 0.87, 4)}, Vec3(1.0, 2.3, 0.9));
  CHECK(s.points == 1);
  const VoxelCell* c = grid.cell(VoxelKey::from_point(Vec3(1.02, 2.33, 0.87), 0.1));
  REQUIRE(c != nullptr);
  CHECK(c->log_odds == doctest::Approx(0.85).epsilon(1e-6));
  CHECK(c->histogram_total() == 1);
  CHECK(c->histogram[4] == 1);
}

TEST_CASE("axis-aligned ray: two leading cells carved, endpoint hit") {
  OccupancyGrid grid(1.0, 0.85, -0.4, -2.0, 3.5, 0.97);
  grid.insert_labeled_frame({lp(2.5, 0.5, 0.5, 0)}, Vec3(0.5, 0.5, 0.5));
  const VoxelCell* origin_cell = grid.cell({0, 0, 0});
  const VoxelCell* mid_cell = grid.cell({1, 0, 0});
  const VoxelCell* end_cell = grid.cell({2, 0, 0});
  REQUIRE(origin_cell);
  REQUIRE(mid_cell);
  REQUIRE(end_cell);
  CHECK(origin_cell->log_odds == doctest::Approx(-0.4).epsilon(1e-6));
  CHECK(mid_cell->log_odds == doctest::Approx(-0.4).epsilon(1e-6));
  CHECK(end_cell->log_odds == doctest::Approx(0.85).epsilon(1e-6));
  CHECK(grid.cell_count() == 3);
}

TEST_CASE("traverse_ray stays inside its endpoints") {
  std::vector<VoxelKey> cells;
  traverse_ray(Vec3(0.5, 0.5, 0.5), Vec3(0.5, 0.5, 0.5), 1.0,
               [&](const VoxelKey& k) { cells.push_back(k); });
  CHECK(cells.empty());  // same cell: endpoint excluded

  cells.clear();
  traverse_ray(Vec3(0.2, 0.2, 0.2), Vec3(2.7, 1.3, 0.4), 1.0,
               [&](const VoxelKey& k) { cells.push_back(k); });
  REQUIRE(!cells.empty());
  CHECK(cells.front() == VoxelKey{0, 0, 0});
  for (const auto& k : cells) CHECK(!(k == VoxelKey{2, 1, 0}));  // endpoint excluded
  // connectivity: consecutive cells differ by one step on one axis
  for (size_t i = 1; i < cells.size(); ++i) {
    const int d = std::abs(cells[i].i - cells[i - 1].i) +
                  std::abs(cells[i].j - cells[i - 1].j) +
                  std::abs(cells[i].k - cells[i - 1].k);
    CHECK(d == 1);
  }
}

TEST_CASE("hit then miss with equal magnitudes cancels to zero") {
  OccupancyGrid grid(1.0, 0.5, -0.5, -2.0, 3.5, 0.97);
  grid.insert_labeled_frame({lp(0.5, 0.5, 0.5, 0)}, Vec3(0.4, 0.5, 0.5));  // hit cell 0
  CHECK(grid.cell({0, 0, 0})->log_odds == doctest::Approx(0.5));
  // next frame: ray passes through cell 0 to a farther endpoint
  grid.insert_labeled_frame({lp(2.5, 0.5, 0.5, 0)}, Vec3(0.4, 0.5, 0.5));
  CHECK(grid.cell({0, 0, 0})->log_odds == doctest::Approx(0.0));
}

TEST_CASE("log-odds clamp at both ends") {
  OccupancyGrid grid;  // l_max 3.5, l_min -2.0, l_hit 0.85, l_miss -0.4
  grid.set_ray_carving(false);
  for (int f = 0; f < 10; ++f)
    grid.insert_labeled_frame({lp(0.05, 0.05, 0.05, 0)}, Vec3(0, 0, 0));
  const VoxelCell* c = grid.cell({0, 0, 0});
  CHECK(c->log_odds == doctest::Approx(3.5));
  CHECK(grid.query_occupancy({0, 0, 0}) == OccupancyState::Occupied);

  OccupancyGrid grid2;
  for (int f = 0; f < 10; ++f)
    grid2.insert_labeled_frame({lp(2.05, 0.05, 0.05, 0)}, Vec3(0, 0, 0));
  const VoxelCell* free_cell = grid2.cell({0, 0, 0});
  REQUIRE(free_cell);
  CHECK(free_cell->log_odds == doctest::Approx(-2.0));  // 10 * -0.4 clamped
  CHECK(grid2.query_occupancy({0, 0, 0}) == OccupancyState::Free);
}

TEST_CASE("fresh grid reports unknown everywhere") {
  OccupancyGrid grid;
  CHECK(grid.query_occupancy({5, 5, 5}) == OccupancyState::Unknown);
  CHECK(!grid.query_material({5, 5, 5}).has_value());
}

TEST_CASE("occupancy updates deduplicate within a frame; histogram does not") {
  OccupancyGrid grid;
  grid.set_ray_carving(false);
  grid.insert_labeled_frame({lp(0.02, 0.02, 0.02, 1), lp(0.04, 0.06, 0.03, 2)},
                            Vec3(0, 0, 0.01));
  const VoxelCell* c = grid.cell({0, 0, 0});
  CHECK(c->log_odds == doctest::Approx(0.85));  // one hit despite two points
  CHECK(c->histogram_total() == 2);
  CHECK(c->color_count == 2);
}

TEST_CASE("a hit beats a miss on the same cell within one frame") {
  OccupancyGrid grid(1.0, 0.85, -0.4, -2.0, 3.5, 0.97);
  // point A ends in cell (1,0,0); point B's ray passes through it
  grid.insert_labeled_frame({lp(1.5, 0.5, 0.5, 0), lp(3.5, 0.5, 0.5, 0)},
                            Vec3(0.5, 0.5, 0.5));
  CHECK(grid.cell({1, 0, 0})->log_odds == doctest::Approx(0.85));
}

TEST_CASE("majority vote picks the most frequent known material") {
  OccupancyGrid grid = sensitive_grid();
  std::vector<LabeledPoint> pts;
  for (int i = 0; i < 5; ++i) pts.push_back(lp(0.2, 0.2, 0.2, 4));  // Wood
  for (int i = 0; i < 2; ++i) pts.push_back(lp(0.3, 0.3, 0.3, 0));  // Concrete
  grid.set_ray_carving(false);
  grid.insert_labeled_frame(pts, Vec3(0.1, 0.1, 0.1));
  CHECK(grid.query_material({0, 0, 0}) == uint8_t(4));
}

TEST_CASE("material ties break to the lowest id") {
  OccupancyGrid grid = sensitive_grid();
  grid.set_ray_carving(false);
  grid.insert_labeled_frame({lp(0.2, 0.2, 0.2, 4), lp(0.3, 0.3, 0.3, 4),
                             lp(0.2, 0.3, 0.2, 0), lp(0.3, 0.2, 0.3, 0)},
                            Vec3(0.1, 0.1, 0.1));
  CHECK(grid.query_material({0, 0, 0}) == uint8_t(0));  // min(0, 4)
}

TEST_CASE("the unknown bin only wins when every known bin is empty") {
  OccupancyGrid grid = sensitive_grid();
  grid.set_ray_carving(false);
  std::vector<LabeledPoint> pts;
  for (int i = 0; i < 10; ++i) pts.push_back(lp(0.2, 0.2, 0.2, 8));  // unknown
  pts.push_back(lp(0.3, 0.3, 0.3, 7));                               // Carpet
  grid.insert_labeled_frame(pts, Vec3(0.1, 0.1, 0.1));
  CHECK(grid.query_material({0, 0, 0}) == uint8_t(7));

  OccupancyGrid grid2 = sensitive_grid();
  grid2.set_ray_carving(false);
  grid2.insert_labeled_frame({lp(0.2, 0.2, 0.2, 8)}, Vec3(0.1, 0.1, 0.1));
  CHECK(grid2.query_material({0, 0, 0}) == uint8_t(8));
}

TEST_CASE("material query requires confident occupancy") {
  OccupancyGrid grid;  // defaults: p_occ 0.97 -> logit ~3.476, one hit is not enough
  grid.set_ray_carving(false);
  grid.insert_labeled_frame({lp(0.05, 0.05, 0.05, 3)}, Vec3(0, 0, 0));
  CHECK(!grid.query_material({0, 0, 0}).has_value());
  for (int f = 0; f < 5; ++f)
    grid.insert_labeled_frame({lp(0.05, 0.05, 0.05, 3)}, Vec3(0, 0, 0));
  CHECK(grid.query_material({0, 0, 0}) == uint8_t(3));
}

TEST_CASE("carved-only cells have no material") {
  OccupancyGrid grid = sensitive_grid(1.0);
  grid.insert_labeled_frame({lp(2.5, 0.5, 0.5, 0)}, Vec3(0.5, 0.5, 0.5));
  const VoxelCell* c = grid.cell({1, 0, 0});
  REQUIRE(c);
  CHECK(c->histogram_total() == 0);
  CHECK(!grid.query_material({1, 0, 0}).has_value());
}

TEST_CASE("non-finite points and bad material ids are rejected") {
  OccupancyGrid grid;
  CHECK_THROWS_AS(
      grid.insert_labeled_frame({lp(std::nan(""), 0, 0, 0)}, Vec3(0, 0, 0)),
      ValidationError);
  CHECK_THROWS_AS(grid.insert_labeled_frame({lp(0, 0, 0, 9)}, Vec3(0, 0, 0)),
                  ValidationError);
}

TEST_CASE("histogram conservation and mode oracle on random insertions") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> coord(-1.5, 1.5);
  std::uniform_int_distribution<int> mat(0, 8);
  for (int trial = 0; trial < 10; ++trial) {
    OccupancyGrid grid = sensitive_grid(0.5);
    grid.set_ray_carving(false);
    std::vector<LabeledPoint> log;
    const int frames = 4;
    size_t total = 0;
    for (int f = 0; f < frames; ++f) {
      std::vector<LabeledPoint> pts;
      for (int i = 0; i < 300; ++i)
        pts.push_back(lp(coord(rng), coord(rng), coord(rng), uint8_t(mat(rng))));
      grid.insert_labeled_frame(pts, Vec3(0, 0, 0));
      total += pts.size();
      log.insert(log.end(), pts.begin(), pts.end());
    }
    uint64_t histogram_sum = 0;
    for (const auto& [key, cell] : grid.cells()) histogram_sum += cell.histogram_total();
    CHECK(histogram_sum == total);

    for (const auto& [key, cell] : grid.cells()) {
      if (!grid.occupied(cell)) continue;
      CHECK(grid.query_material(key) == brute_force_mode(log, key, 0.5));
    }
  }
}

TEST_CASE("insertion order does not change the material argmax") {
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> coord(-1.0, 1.0);
  std::uniform_int_distribution<int> mat(0, 8);
  std::vector<LabeledPoint> pts;
  for (int i = 0; i < 500; ++i)
    pts.push_back(lp(coord(rng), coord(rng), coord(rng), uint8_t(mat(rng))));

  OccupancyGrid a = sensitive_grid(0.25);
  a.set_ray_carving(false);
  a.insert_labeled_frame(pts, Vec3(0, 0, 0));

  std::shuffle(pts.begin(), pts.end(), rng);
  OccupancyGrid b = sensitive_grid(0.25);
  b.set_ray_carving(false);
  b.insert_labeled_frame(pts, Vec3(0, 0, 0));

  REQUIRE(a.cell_count() == b.cell_count());
  for (const auto& [key, cell] : a.cells())
    CHECK(a.query_material(key) == b.query_material(key));
}

TEST_CASE("running color mean matches the exact-sum oracle") {
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<int> byte(0, 255);
  OccupancyGrid grid;
  grid.set_ray_carving(false);
  double sum[3] = {0, 0, 0};
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    Color c{uint8_t(byte(rng)), uint8_t(byte(rng)), uint8_t(byte(rng))};
    sum[0] += c.r;
    sum[1] += c.g;
    sum[2] += c.b;
    grid.insert_labeled_frame({LabeledPoint{Vec3(0.05, 0.05, 0.05), c, 0}}, Vec3(0, 0, 0));
  }
  const VoxelCell* cell = grid.cell({0, 0, 0});
  REQUIRE(cell);
  CHECK(cell->color_count == n);
  for (int ch = 0; ch < 3; ++ch)
    CHECK(std::abs(cell->color_mean[size_t(ch)] - sum[ch] / n) < 0.5);
}

TEST_CASE("rays beyond the range cap keep their endpoint but skip carving") {
  OccupancyGrid grid(1.0, 0.85, -0.4, -2.0, 3.5, 0.97);
  grid.set_max_ray_range(2.0);
  UpdateStats s = grid.insert_labeled_frame({lp(5.5, 0.5, 0.5, 2)}, Vec3(0.5, 0.5, 0.5));
  CHECK(s.rays_capped == 1);
  CHECK(grid.cell({5, 0, 0}) != nullptr);   // endpoint updated
  CHECK(grid.cell({1, 0, 0}) == nullptr);   // no carving
}

TEST_CASE("snapshot round trip preserves cells and is byte-deterministic") {
  TempDir tmp("snap");
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> coord(-2.0, 2.0);
  std::uniform_int_distribution<int> mat(0, 8);
  OccupancyGrid grid;
  for (int f = 0; f < 3; ++f) {
    std::vector<LabeledPoint> pts;
    for (int i = 0; i < 400; ++i)
      pts.push_back(lp(coord(rng), coord(rng), std::abs(coord(rng)) + 0.1,
                       uint8_t(mat(rng)), Color{uint8_t(mat(rng) * 20), 5, 200}));
    grid.insert_labeled_frame(pts, Vec3(0, 0, 1.0));
  }
  grid.save_snapshot(tmp.file("a.acsnap"));
  grid.save_snapshot(tmp.file("b.acsnap"));
  CHECK(testutil::read_bytes(tmp.file("a.acsnap")) ==
        testutil::read_bytes(tmp.file("b.acsnap")));

  OccupancyGrid loaded = OccupancyGrid::load_snapshot(tmp.file("a.acsnap"));
  CHECK(loaded.resolution() == grid.resolution());
  CHECK(loaded.l_hit() == grid.l_hit());
  CHECK(loaded.p_occ() == grid.p_occ());
  REQUIRE(loaded.cell_count() == grid.cell_count());
  for (const auto& [key, cell] : grid.cells()) {
    const VoxelCell* lc = loaded.cell(key);
    REQUIRE(lc);
    CHECK(lc->log_odds == cell.log_odds);
    CHECK(lc->histogram == cell.histogram);
    CHECK(lc->color_count == cell.color_count);
    for (int ch = 0; ch < 3; ++ch)
      CHECK(std::abs(lc->color_mean[size_t(ch)] - cell.color_mean[size_t(ch)]) <= 0.5);
  }
  // saving the loaded map reproduces the file
  loaded.save_snapshot(tmp.file("c.acsnap"));
  CHECK(testutil::read_bytes(tmp.file("a.acsnap")) ==
        testutil::read_bytes(tmp.file("c.acsnap")));
}

TEST_CASE("empty grid exports a valid zero-vertex PLY") {
  TempDir tmp("export");
  OccupancyGrid grid;
  MaterialDb db = load_material_database(kMaterials);
  grid.export_map(OccupancyGrid::ExportMode::ColorMap, tmp.file("empty.ply"), db);
  ply::Cloud c = ply::read(tmp.file("empty.ply"));
  CHECK(c.xyz.empty());
}

TEST_CASE("one occupied concrete cell exports at the cell center in palette color") {
  TempDir tmp("export");
  MaterialDb db = load_material_database(kMaterials);
  OccupancyGrid grid = sensitive_grid(0.1);
  grid.set_ray_carving(false);
  grid.insert_labeled_frame({lp(0.33, 0.47, 1.21, 0)}, Vec3(0.3, 0.4, 1.2));
  grid.export_map(OccupancyGrid::ExportMode::MaterialMap, tmp.file("one.ply"), db);
  ply::Cloud c = ply::read(tmp.file("one.ply"));
  REQUIRE(c.xyz.size() == 1);
  CHECK((c.xyz[0] - Vec3(0.35, 0.45, 1.25)).norm() < 1e-6);
  CHECK(c.rgb[0] == db.palette_color(0));
}

TEST_CASE("exported vertices are exactly the occupied cell centers") {
  TempDir tmp("export");
  MaterialDb db = load_material_database(kMaterials);
  OccupancyGrid grid = sensitive_grid(0.5);
  grid.set_ray_carving(false);
  std::mt19937_64 rng(47);
  std::uniform_real_distribution<double> coord(-2.0, 2.0);
  std::vector<LabeledPoint> pts;
  for (int i = 0; i < 200; ++i)
    pts.push_back(lp(coord(rng), coord(rng), coord(rng), 0));
  grid.insert_labeled_frame(pts, Vec3(0, 0, 0));
  grid.export_map(OccupancyGrid::ExportMode::ColorMap, tmp.file("c.ply"), db);

  std::set<std::array<float, 3>> expected;
  for (const auto& [key, cell] : grid.cells())
    if (grid.occupied(cell)) {
      Vec3 c = key.center(0.5);
      expected.insert({float(c.x()), float(c.y()), float(c.z())});
    }
  ply::Cloud c = ply::read(tmp.file("c.ply"));
  std::set<std::array<float, 3>> got;
  for (const auto& p : c.xyz) got.insert({float(p.x()), float(p.y()), float(p.z())});
  CHECK(got == expected);
}

TEST_CASE("map stats: empty, one cell per material, bounds") {
  OccupancyGrid empty;
  MapStats s0 = empty.stats();
  CHECK(s0.cells == 0);
  CHECK(s0.occupied == 0);
  CHECK(s0.free == 0);

  OccupancyGrid grid = sensitive_grid(1.0);
  grid.set_ray_carving(false);
  for (int m = 0; m < kLabelCount; ++m)
    grid.insert_labeled_frame({lp(m + 0.5, 0.5, 0.5, uint8_t(m))}, Vec3(0.5, 0.5, 0.4));
  MapStats s = grid.stats();
  CHECK(s.cells == 9);
  CHECK(s.occupied == 9);
  for (int m = 0; m < kLabelCount; ++m) CHECK(s.material_cells[size_t(m)] == 1);
  CHECK(s.min_key == VoxelKey{0, 0, 0});
  CHECK(s.max_key == VoxelKey{8, 0, 0});
  CHECK(s.memory_bytes > 0);

  MaterialDb db = load_material_database(kMaterials);
  std::string text = format_map_stats(s, &db);
  CHECK(text.find("material[Concrete]: 1") != std::string::npos);
  CHECK(text.find("occupied: 9") != std::string::npos);
}
