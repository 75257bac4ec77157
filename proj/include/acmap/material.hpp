#pragma once

#include "acmap/types.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace acmap {

// Fixed label codes; serialized ids must stay stable across runs.
enum class SemanticLabel : uint8_t {
  Wall = 0,
  Floor = 1,
  Ceiling = 2,
  Window = 3,
  Furniture = 4,
  Door = 5,
  Electronics = 6,
  Chair = 7,
  Unknown = 8,
};

inline constexpr int kLabelCount = 9;
inline constexpr int kKnownLabelCount = 8;
inline constexpr int kBandCount = 6;

/// Octave band centres, Hz.
inline constexpr std::array<int, kBandCount> kOctaveBands = {125, 250, 500,
                                                             1000, 2000, 4000};

inline const char* label_name(SemanticLabel l) {
  switch (l) {
    case SemanticLabel::Wall: return "Wall";
    case SemanticLabel::Floor: return "Floor";
    case SemanticLabel::Ceiling: return "Ceiling";
    case SemanticLabel::Window: return "Window";
    case SemanticLabel::Furniture: return "Furniture";
    case SemanticLabel::Door: return "Door";
    case SemanticLabel::Electronics: return "Electronics";
    case SemanticLabel::Chair: return "Chair";
    case SemanticLabel::Unknown: return "Unknown";
  }
  throw ValidationError("label_name: invalid label code " +
                        std::to_string(static_cast<int>(l)));
}

inline std::optional<SemanticLabel> label_from_name(const std::string& name) {
  for (int i = 0; i < kLabelCount; ++i) {
    auto l = static_cast<SemanticLabel>(i);
    if (name == label_name(l)) return l;
  }
  return std::nullopt;
}

struct AcousticMaterial {
  uint8_t id = 0;
  std::string name;
  // Absorption coefficient per octave band, each in [0, 1].
  std::array<double, kBandCount> absorption{};
  Color display_color;
  std::string provenance;
};

namespace detail {

inline std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline Color parse_hex_color(const std::string& file, int line,
                             const std::string& hex) {
  if (hex.size() != 7 || hex[0] != '#')
    throw ParseError(file, line, "expected color '#rrggbb', got '" + hex + "'");
  auto nibble = [&](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw ParseError(file, line, "bad hex digit in color '" + hex + "'");
  };
  auto byte = [&](int i) {
    return static_cast<uint8_t>(nibble(hex[i]) * 16 + nibble(hex[i + 1]));
  };
  return Color{byte(1), byte(3), byte(5)};
}

}  // namespace detail

/// Validated set of acoustic materials. Immutable after load; safe to share
/// read-only across pipeline stages.
class MaterialDb {
public:
  MaterialDb() = default;

  explicit MaterialDb(std::vector<AcousticMaterial> materials)
      : materials_(std::move(materials)) {
    validate();
  }

  const std::vector<AcousticMaterial>& materials() const { return materials_; }
  size_t size() const { return materials_.size(); }

  const AcousticMaterial& material(uint8_t id) const {
    if (id >= materials_.size())
      throw ValidationError("material id " + std::to_string(id) +
                            " out of range (database has " +
                            std::to_string(materials_.size()) + " materials)");
    return materials_[id];
  }

  std::optional<uint8_t> find(const std::string& name) const {
    for (const auto& m : materials_)
      if (m.name == name) return m.id;
    return std::nullopt;
  }

  /// Id of the reserved material named "Unknown"; throws if absent.
  uint8_t unknown_id() const {
    auto id = find("Unknown");
    if (!id) throw ValidationError("material database has no 'Unknown' entry");
    return *id;
  }

  Color palette_color(uint8_t id) const { return material(id).display_color; }

private:
  void validate() const {
    for (size_t i = 0; i < materials_.size(); ++i) {
      const auto& m = materials_[i];
      if (m.id != i)
        throw ValidationError("material ids must be dense 0..N-1; entry " +
                              std::to_string(i) + " has id " +
                              std::to_string(m.id));
      if (m.name.empty())
        throw ValidationError("material " + std::to_string(i) +
                              ": empty name");
      for (int b = 0; b < kBandCount; ++b) {
        double a = m.absorption[b];
        if (!(a >= 0.0 && a <= 1.0))
          throw ValidationError(
              "material '" + m.name + "': absorption at " +
              std::to_string(kOctaveBands[b]) + " Hz is " + std::to_string(a) +
              ", outside [0, 1]");
      }
      for (size_t j = 0; j < i; ++j) {
        if (materials_[j].name == m.name)
          throw ValidationError("duplicate material name '" + m.name + "'");
        if (materials_[j].display_color == m.display_color)
          throw ValidationError("materials '" + materials_[j].name + "' and '" +
                                m.name + "' share a display color");
      }
    }
  }

  std::vector<AcousticMaterial> materials_;
};

/// Parses a material database file. One record per line:
///   material|<id>|<name>|<a125>,<a250>,<a500>,<a1000>,<a2000>,<a4000>|#rrggbb|<provenance>
/// Blank lines and '#' comments are ignored.
inline MaterialDb load_material_database(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open material database '" + path + "'");

  std::vector<AcousticMaterial> mats;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto fields = detail::split(t, '|');
    if (fields.size() != 6 || detail::trim(fields[0]) != "material")
      throw ParseError(path, lineno,
                       "expected 'material|id|name|a1,..,a6|#rrggbb|provenance'");
    AcousticMaterial m;
    try {
      m.id = static_cast<uint8_t>(std::stoi(detail::trim(fields[1])));
    } catch (const std::exception&) {
      throw ParseError(path, lineno, "bad material id '" + fields[1] + "'");
    }
    m.name = detail::trim(fields[2]);
    auto coeffs = detail::split(detail::trim(fields[3]), ',');
    if (coeffs.size() != kBandCount)
      throw ParseError(path, lineno,
                       "expected " + std::to_string(kBandCount) +
                           " absorption coefficients, got " +
                           std::to_string(coeffs.size()));
    for (int b = 0; b < kBandCount; ++b) {
      try {
        m.absorption[b] = std::stod(detail::trim(coeffs[b]));
      } catch (const std::exception&) {
        throw ParseError(path, lineno,
                         "bad absorption coefficient '" + coeffs[b] + "'");
      }
    }
    m.display_color = detail::parse_hex_color(path, lineno, detail::trim(fields[4]));
    m.provenance = detail::trim(fields[5]);
    mats.push_back(std::move(m));
  }
  return MaterialDb(std::move(mats));  // validation may throw
}

inline void save_material_database(const MaterialDb& db,
                                   const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write material database '" + path + "'");
  out << "# acmap material database\n";
  out << "# material|id|name|absorption 125,250,500,1000,2000,4000 Hz|color|provenance\n";
  char hex[8];
  for (const auto& m : db.materials()) {
    std::snprintf(hex, sizeof(hex), "#%02x%02x%02x", m.display_color.r,
                  m.display_color.g, m.display_color.b);
    out << "material|" << int(m.id) << "|" << m.name << "|";
    for (int b = 0; b < kBandCount; ++b) {
      if (b) out << ",";
      std::ostringstream c;
      c << m.absorption[b];
      out << c.str();
    }
    out << "|" << hex << "|" << m.provenance << "\n";
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

/// Total mapping from every semantic label to a material id.
class MatchingTable {
public:
  MatchingTable() { table_.fill(0); }

  MatchingTable(const std::array<uint8_t, kLabelCount>& ids,
                const MaterialDb& db)
      : table_(ids) {
    for (int i = 0; i < kLabelCount; ++i) db.material(table_[i]);  // range check
  }

  uint8_t lookup(SemanticLabel l) const {
    return table_[static_cast<uint8_t>(l)];
  }

  const std::array<uint8_t, kLabelCount>& ids() const { return table_; }

private:
  std::array<uint8_t, kLabelCount> table_;
};

inline uint8_t lookup_material(SemanticLabel l, const MatchingTable& table) {
  return table.lookup(l);
}

/// Default label->material assignment for the shipped database.
inline MatchingTable default_matching_table(const MaterialDb& db) {
  const std::array<std::pair<SemanticLabel, const char*>, kLabelCount> rows = {{
      {SemanticLabel::Wall, "Concrete"},
      {SemanticLabel::Floor, "Linoleum"},
      {SemanticLabel::Ceiling, "Plywood"},
      {SemanticLabel::Window, "Thick glass"},
      {SemanticLabel::Furniture, "Wood"},
      {SemanticLabel::Door, "Wood panel"},
      {SemanticLabel::Electronics, "Plastic"},
      {SemanticLabel::Chair, "Carpet"},
      {SemanticLabel::Unknown, "Unknown"},
  }};
  std::array<uint8_t, kLabelCount> ids{};
  for (const auto& [label, mat] : rows) {
    auto id = db.find(mat);
    if (!id)
      throw ValidationError(std::string("default matching needs material '") +
                            mat + "', absent from database");
    ids[static_cast<uint8_t>(label)] = *id;
  }
  return MatchingTable(ids, db);
}

/// Parses a matching table file: one "Label = Material name" line per label,
/// all 9 labels required exactly once.
inline MatchingTable load_matching_table(const std::string& path,
                                         const MaterialDb& db) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open matching table '" + path + "'");
  std::array<uint8_t, kLabelCount> ids{};
  std::array<bool, kLabelCount> seen{};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ParseError(path, lineno, "expected 'Label = Material name'");
    auto label = label_from_name(detail::trim(t.substr(0, eq)));
    if (!label)
      throw ParseError(path, lineno,
                       "unknown label '" + detail::trim(t.substr(0, eq)) + "'");
    auto mat = db.find(detail::trim(t.substr(eq + 1)));
    if (!mat)
      throw ParseError(path, lineno, "unknown material '" +
                                         detail::trim(t.substr(eq + 1)) + "'");
    int idx = static_cast<int>(*label);
    if (seen[idx])
      throw ParseError(path, lineno,
                       std::string("duplicate entry for label '") +
                           label_name(*label) + "'");
    seen[idx] = true;
    ids[idx] = *mat;
  }
  for (int i = 0; i < kLabelCount; ++i)
    if (!seen[i])
      throw ValidationError(std::string("matching table '") + path +
                            "' missing label '" +
                            label_name(static_cast<SemanticLabel>(i)) + "'");
  return MatchingTable(ids, db);
}

}  // namespace acmap
