#include "acmap/material.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <set>
#include <string>

using namespace acmap;
using testutil::TempDir;
using testutil::write_text;

namespace {
const std::string kMaterials = std::string(testutil::kDataDir) + "/materials.txt";
const std::string kMatching = std::string(testutil::kDataDir) + "/matching.txt";
}  // namespace

TEST_CASE("label codes are fixed and stable") {
  CHECK(int(SemanticLabel::Wall) == 0);
  CHECK(int(SemanticLabel::Floor) == 1);
  CHECK(int(SemanticLabel::Ceiling) == 2);
  CHECK(int(SemanticLabel::Window) == 3);
  CHECK(int(SemanticLabel::Furniture) == 4);
  CHECK(int(SemanticLabel::Door) == 5);
  CHECK(int(SemanticLabel::Electronics) == 6);
  CHECK(int(SemanticLabel::Chair) == 7);
  CHECK(int(SemanticLabel::Unknown) == 8);
  CHECK(kLabelCount == 9);
  CHECK(label_from_name("Chair") == SemanticLabel::Chair);
  CHECK(!label_from_name("chairs").has_value());
}

TEST_CASE("shipped database carries the eight table materials plus Unknown") {
  MaterialDb db = load_material_database(kMaterials);
  REQUIRE(db.size() == 9);
  const std::set<std::string> expected = {"Concrete", "Linoleum",  "Plywood",
                                          "Thick glass", "Wood",   "Wood panel",
                                          "Plastic",  "Carpet",    "Unknown"};
  std::set<std::string> got;
  for (const auto& m : db.materials()) got.insert(m.name);
  CHECK(got == expected);
  CHECK(db.unknown_id() == 8);
}

TEST_CASE("shipped matching table reproduces the object/material rows") {
  MaterialDb db = load_material_database(kMaterials);
  MatchingTable table = load_matching_table(kMatching, db);
  auto name = [&](SemanticLabel l) { return db.material(lookup_material(l, table)).name; };
  CHECK(name(SemanticLabel::Wall) == "Concrete");
  CHECK(name(SemanticLabel::Floor) == "Linoleum");
  CHECK(name(SemanticLabel::Ceiling) == "Plywood");
  CHECK(name(SemanticLabel::Window) == "Thick glass");
  CHECK(name(SemanticLabel::Furniture) == "Wood");
  CHECK(name(SemanticLabel::Door) == "Wood panel");
  CHECK(name(SemanticLabel::Electronics) == "Plastic");
  CHECK(name(SemanticLabel::Chair) == "Carpet");
  CHECK(name(SemanticLabel::Unknown) == "Unknown");

  MatchingTable def = default_matching_table(db);
  CHECK(def.ids() == table.ids());
}

TEST_CASE("lookup is total over all labels") {
  MaterialDb db = load_material_database(kMaterials);
  MatchingTable table = load_matching_table(kMatching, db);
  for (int l = 0; l < kLabelCount; ++l)
    CHECK_NOTHROW(db.material(lookup_material(SemanticLabel(l), table)));
}

TEST_CASE("single-material file with boundary coefficients") {
  TempDir tmp("matdb");
  write_text(tmp.file("one.txt"),
             "material|0|Concrete|0.0,0.0,0.0,0.0,0.0,0.0|#334455|test\n");
  MaterialDb db = load_material_database(tmp.file("one.txt"));
  REQUIRE(db.size() == 1);
  CHECK(db.material(0).name == "Concrete");
  CHECK(db.material(0).id == 0);
  for (double a : db.material(0).absorption) CHECK(a == 0.0);
}

TEST_CASE("out-of-range absorption is rejected with the offending band") {
  TempDir tmp("matdb");
  write_text(tmp.file("bad.txt"),
             "material|0|Concrete|0.0,0.0,1.2,0.0,0.0,0.0|#334455|test\n");
  CHECK_THROWS_WITH_AS(load_material_database(tmp.file("bad.txt")),
                       doctest::Contains("500"), ValidationError);
}

TEST_CASE("parse errors carry the line number") {
  TempDir tmp("matdb");
  write_text(tmp.file("bad.txt"), "# header\nmaterial|0|X|0,0,0,0,0,0|#000000|ok\n"
                                  "material|oops\n");
  try {
    load_material_database(tmp.file("bad.txt"));
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("validation rejects sparse ids, duplicate names and shared colors") {
  TempDir tmp("matdb");
  write_text(tmp.file("gap.txt"),
             "material|0|A|0,0,0,0,0,0|#000001|t\nmaterial|2|B|0,0,0,0,0,0|#000002|t\n");
  CHECK_THROWS_AS(load_material_database(tmp.file("gap.txt")), ValidationError);
  write_text(tmp.file("dup.txt"),
             "material|0|A|0,0,0,0,0,0|#000001|t\nmaterial|1|A|0,0,0,0,0,0|#000002|t\n");
  CHECK_THROWS_AS(load_material_database(tmp.file("dup.txt")), ValidationError);
  write_text(tmp.file("col.txt"),
             "material|0|A|0,0,0,0,0,0|#000001|t\nmaterial|1|B|0,0,0,0,0,0|#000001|t\n");
  CHECK_THROWS_AS(load_material_database(tmp.file("col.txt")), ValidationError);
}

TEST_CASE("palette colors are pairwise distinct and stable") {
  MaterialDb db = load_material_database(kMaterials);
  for (size_t i = 0; i < db.size(); ++i)
    for (size_t j = i + 1; j < db.size(); ++j)
      CHECK(!(db.palette_color(uint8_t(i)) == db.palette_color(uint8_t(j))));

  // read back from the shipped file
  const uint8_t concrete = *db.find("Concrete");
  CHECK(db.palette_color(concrete) == Color{0x7f, 0x8f, 0xa6});
  CHECK(db.palette_color(db.unknown_id()) == Color{128, 128, 128});
  CHECK_THROWS_AS(db.palette_color(99), ValidationError);
}

TEST_CASE("unknown material has zero absorption") {
  MaterialDb db = load_material_database(kMaterials);
  for (double a : db.material(db.unknown_id()).absorption) CHECK(a == 0.0);
}

TEST_CASE("database load/save round trip is idempotent") {
  TempDir tmp("matdb");
  MaterialDb db = load_material_database(kMaterials);
  save_material_database(db, tmp.file("copy.txt"));
  MaterialDb db2 = load_material_database(tmp.file("copy.txt"));
  REQUIRE(db2.size() == db.size());
  for (size_t i = 0; i < db.size(); ++i) {
    CHECK(db2.material(uint8_t(i)).name == db.material(uint8_t(i)).name);
    CHECK(db2.material(uint8_t(i)).absorption == db.material(uint8_t(i)).absorption);
    CHECK(db2.material(uint8_t(i)).display_color == db.material(uint8_t(i)).display_color);
    CHECK(db2.material(uint8_t(i)).provenance == db.material(uint8_t(i)).provenance);
  }
  // save(load(save(db))) equals save(db) byte for byte
  save_material_database(db2, tmp.file("copy2.txt"));
  CHECK(testutil::read_bytes(tmp.file("copy.txt")) ==
        testutil::read_bytes(tmp.file("copy2.txt")));
}

TEST_CASE("matching table file must be total and unambiguous") {
  TempDir tmp("match");
  MaterialDb db = load_material_database(kMaterials);
  write_text(tmp.file("partial.txt"), "Wall = Concrete\n");
  CHECK_THROWS_WITH_AS(load_matching_table(tmp.file("partial.txt"), db),
                       doctest::Contains("missing label"), ValidationError);
  write_text(tmp.file("dup.txt"),
             "Wall = Concrete\nWall = Wood\nFloor = Linoleum\nCeiling = Plywood\n"
             "Window = Thick glass\nFurniture = Wood\nDoor = Wood panel\n"
             "Electronics = Plastic\nChair = Carpet\nUnknown = Unknown\n");
  CHECK_THROWS_AS(load_matching_table(tmp.file("dup.txt"), db), ParseError);
  write_text(tmp.file("badmat.txt"), "Wall = Adamantium\n");
  CHECK_THROWS_AS(load_matching_table(tmp.file("badmat.txt"), db), ParseError);
}
