#pragma once

#include "acmap/ply.hpp"
#include "acmap/types.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace acmap::pcd {

/// Reads a PCD v0.7 file (DATA ascii or binary). Needs x/y/z fields; an
/// "rgb" field is decoded as the packed 0x00RRGGBB convention, either
/// bit-cast into a float (TYPE F) or stored as an integer (TYPE U/I).
inline ply::Cloud read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open PCD file '" + path + "'");

  std::vector<std::string> names;
  std::vector<int> sizes, counts;
  std::vector<char> types;
  size_t points = 0;
  bool binary = false;
  bool have_data = false;
  ply::Cloud cloud;

  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      cloud.comments.push_back(line.substr(line.find_first_not_of("# ")));
      continue;
    }
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "VERSION") {
      // v0.7 expected; tolerate the string as-is
    } else if (key == "FIELDS") {
      std::string f;
      while (ls >> f) names.push_back(f);
    } else if (key == "SIZE") {
      int v;
      while (ls >> v) sizes.push_back(v);
    } else if (key == "TYPE") {
      char c;
      while (ls >> c) types.push_back(c);
    } else if (key == "COUNT") {
      int v;
      while (ls >> v) counts.push_back(v);
    } else if (key == "WIDTH" || key == "HEIGHT" || key == "VIEWPOINT") {
      // width*height must equal POINTS; POINTS is authoritative here
    } else if (key == "POINTS") {
      ls >> points;
    } else if (key == "DATA") {
      std::string mode;
      ls >> mode;
      if (mode == "ascii") binary = false;
      else if (mode == "binary") binary = true;
      else throw ParseError(path, lineno, "unsupported DATA mode '" + mode + "'");
      have_data = true;
      break;
    } else {
      throw ParseError(path, lineno, "unexpected PCD header key '" + key + "'");
    }
  }
  if (!have_data) throw ParseError(path, "header has no DATA line");
  if (names.empty() || names.size() != sizes.size() || names.size() != types.size())
    throw ParseError(path, "inconsistent FIELDS/SIZE/TYPE header");
  if (counts.empty()) counts.assign(names.size(), 1);
  if (counts.size() != names.size())
    throw ParseError(path, "inconsistent COUNT header");

  int ix = -1, iy = -1, iz = -1, irgb = -1;
  for (size_t i = 0; i < names.size(); ++i) {
    if (names[i] == "x") ix = int(i);
    else if (names[i] == "y") iy = int(i);
    else if (names[i] == "z") iz = int(i);
    else if (names[i] == "rgb" || names[i] == "rgba") irgb = int(i);
  }
  if (ix < 0 || iy < 0 || iz < 0) throw ParseError(path, "missing x/y/z fields");

  auto unpack_rgb = [](uint32_t v) {
    return Color{uint8_t((v >> 16) & 0xff), uint8_t((v >> 8) & 0xff), uint8_t(v & 0xff)};
  };

  cloud.xyz.reserve(points);
  if (irgb >= 0) cloud.rgb.reserve(points);

  if (binary) {
    size_t stride = 0;
    std::vector<size_t> offsets(names.size());
    for (size_t i = 0; i < names.size(); ++i) {
      offsets[i] = stride;
      stride += size_t(sizes[i]) * size_t(counts[i]);
    }
    std::vector<unsigned char> buf(stride * points);
    in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()));
    if (size_t(in.gcount()) != buf.size())
      throw ParseError(path, "truncated binary point data");
    for (size_t p = 0; p < points; ++p) {
      const unsigned char* rec = buf.data() + p * stride;
      auto f32 = [&](int i) {
        float v;
        std::memcpy(&v, rec + offsets[size_t(i)], 4);
        return v;
      };
      cloud.xyz.emplace_back(f32(ix), f32(iy), f32(iz));
      if (irgb >= 0) {
        uint32_t v;
        std::memcpy(&v, rec + offsets[size_t(irgb)], 4);
        cloud.rgb.push_back(unpack_rgb(v));
      }
    }
  } else {
    for (size_t p = 0; p < points; ++p) {
      std::string data_line;
      do {
        if (!std::getline(in, data_line))
          throw ParseError(path, "truncated ascii point data at point " + std::to_string(p));
        ++lineno;
      } while (data_line.empty());
      std::istringstream ls(data_line);
      std::vector<std::string> toks;
      std::string t;
      while (ls >> t) toks.push_back(t);
      size_t expected = 0;
      for (size_t i = 0; i < names.size(); ++i) expected += size_t(counts[i]);
      if (toks.size() != expected)
        throw ParseError(path, lineno, "bad point line (expected " +
                                           std::to_string(expected) + " values)");
      std::vector<size_t> first(names.size());
      size_t acc = 0;
      for (size_t i = 0; i < names.size(); ++i) {
        first[i] = acc;
        acc += size_t(counts[i]);
      }
      cloud.xyz.emplace_back(std::stod(toks[first[size_t(ix)]]),
                             std::stod(toks[first[size_t(iy)]]),
                             std::stod(toks[first[size_t(iz)]]));
      if (irgb >= 0) {
        const std::string& tok = toks[first[size_t(irgb)]];
        uint32_t v;
        if (types[size_t(irgb)] == 'F') {
          float f = std::stof(tok);
          std::memcpy(&v, &f, 4);
        } else {
          v = uint32_t(std::stoul(tok));
        }
        cloud.rgb.push_back(unpack_rgb(v));
      }
    }
  }
  return cloud;
}

/// Writes PCD v0.7 with FIELDS x y z rgb (rgb as TYPE U, packed 0x00RRGGBB).
inline void write(const std::string& path, const std::vector<Vec3>& xyz,
                  const std::vector<Color>& rgb, bool binary = true,
                  const std::vector<std::string>& comments = {}) {
  if (!rgb.empty() && rgb.size() != xyz.size())
    throw ValidationError("PCD write: color count does not match point count");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write PCD file '" + path + "'");

  for (const auto& c : comments) out << "# " << c << "\n";
  const bool has_rgb = !rgb.empty();
  out << "VERSION .7\n";
  out << "FIELDS x y z" << (has_rgb ? " rgb" : "") << "\n";
  out << "SIZE 4 4 4" << (has_rgb ? " 4" : "") << "\n";
  out << "TYPE F F F" << (has_rgb ? " U" : "") << "\n";
  out << "COUNT 1 1 1" << (has_rgb ? " 1" : "") << "\n";
  out << "WIDTH " << xyz.size() << "\nHEIGHT 1\n";
  out << "VIEWPOINT 0 0 0 1 0 0 0\n";
  out << "POINTS " << xyz.size() << "\n";
  out << "DATA " << (binary ? "binary" : "ascii") << "\n";

  auto pack = [](const Color& c) {
    return uint32_t(c.r) << 16 | uint32_t(c.g) << 8 | uint32_t(c.b);
  };
  if (binary) {
    for (size_t i = 0; i < xyz.size(); ++i) {
      float f[3] = {float(xyz[i].x()), float(xyz[i].y()), float(xyz[i].z())};
      out.write(reinterpret_cast<const char*>(f), 12);
      if (has_rgb) {
        uint32_t v = pack(rgb[i]);
        out.write(reinterpret_cast<const char*>(&v), 4);
      }
    }
  } else {
    std::ostringstream body;
    body.precision(9);
    for (size_t i = 0; i < xyz.size(); ++i) {
      body << float(xyz[i].x()) << " " << float(xyz[i].y()) << " " << float(xyz[i].z());
      if (has_rgb) body << " " << pack(rgb[i]);
      body << "\n";
    }
    out << body.str();
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace acmap::pcd
