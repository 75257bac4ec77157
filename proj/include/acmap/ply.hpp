#pragma once

#include "acmap/types.hpp"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace acmap::ply {

// Scalar property of the vertex element.
enum class Scalar { F32, F64, U8, I8, U16, I16, U32, I32 };

inline size_t scalar_size(Scalar s) {
  switch (s) {
    case Scalar::F32: return 4;
    case Scalar::F64: return 8;
    case Scalar::U8: case Scalar::I8: return 1;
    case Scalar::U16: case Scalar::I16: return 2;
    case Scalar::U32: case Scalar::I32: return 4;
  }
  return 0;
}

inline std::optional<Scalar> scalar_from_name(const std::string& n) {
  if (n == "float" || n == "float32") return Scalar::F32;
  if (n == "double" || n == "float64") return Scalar::F64;
  if (n == "uchar" || n == "uint8") return Scalar::U8;
  if (n == "char" || n == "int8") return Scalar::I8;
  if (n == "ushort" || n == "uint16") return Scalar::U16;
  if (n == "short" || n == "int16") return Scalar::I16;
  if (n == "uint" || n == "uint32") return Scalar::U32;
  if (n == "int" || n == "int32") return Scalar::I32;
  return std::nullopt;
}

struct Cloud {
  std::vector<Vec3> xyz;
  std::vector<Color> rgb;  // empty when the file has no color properties
  std::vector<std::string> comments;

  bool has_color() const { return !rgb.empty(); }
};

namespace detail {

struct Property {
  std::string name;
  Scalar type;
};

inline double decode_scalar(const unsigned char* p, Scalar t) {
  // Little-endian buffers only; matches the declared file format.
  switch (t) {
    case Scalar::F32: { float v; std::memcpy(&v, p, 4); return v; }
    case Scalar::F64: { double v; std::memcpy(&v, p, 8); return v; }
    case Scalar::U8: return *p;
    case Scalar::I8: { int8_t v; std::memcpy(&v, p, 1); return v; }
    case Scalar::U16: { uint16_t v; std::memcpy(&v, p, 2); return v; }
    case Scalar::I16: { int16_t v; std::memcpy(&v, p, 2); return v; }
    case Scalar::U32: { uint32_t v; std::memcpy(&v, p, 4); return v; }
    case Scalar::I32: { int32_t v; std::memcpy(&v, p, 4); return v; }
  }
  return 0;
}

}  // namespace detail

/// Reads the vertex element of an ASCII or binary-little-endian PLY file.
/// x/y/z are required; red/green/blue are picked up when present. Elements
/// after vertex are ignored.
inline Cloud read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open PLY file '" + path + "'");

  std::string line;
  int lineno = 0;
  auto next_line = [&]() -> std::string {
    if (!std::getline(in, line)) throw ParseError(path, lineno, "unexpected end of header");
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };

  if (next_line() != "ply") throw ParseError(path, lineno, "missing 'ply' magic");

  bool binary = false;
  bool have_format = false;
  size_t vertex_count = 0;
  bool in_vertex_element = false;
  bool seen_vertex_element = false;
  std::vector<detail::Property> props;
  Cloud cloud;

  while (true) {
    std::istringstream ls(next_line());
    std::string tok;
    ls >> tok;
    if (tok.empty()) continue;
    if (tok == "comment") {
      std::string rest;
      std::getline(ls, rest);
      if (!rest.empty() && rest.front() == ' ') rest.erase(0, 1);
      cloud.comments.push_back(rest);
    } else if (tok == "format") {
      std::string fmt, ver;
      ls >> fmt >> ver;
      if (fmt == "ascii") binary = false;
      else if (fmt == "binary_little_endian") binary = true;
      else throw ParseError(path, lineno, "unsupported format '" + fmt + "'");
      have_format = true;
    } else if (tok == "element") {
      std::string name;
      size_t count = 0;
      ls >> name >> count;
      if (name == "vertex") {
        if (seen_vertex_element) throw ParseError(path, lineno, "duplicate vertex element");
        seen_vertex_element = true;
        in_vertex_element = true;
        vertex_count = count;
      } else {
        in_vertex_element = false;
      }
    } else if (tok == "property") {
      if (!in_vertex_element) continue;  // later elements are skipped wholesale
      std::string type;
      ls >> type;
      if (type == "list")
        throw ParseError(path, lineno, "list properties are not supported on vertex");
      auto sc = scalar_from_name(type);
      if (!sc) throw ParseError(path, lineno, "unknown property type '" + type + "'");
      std::string name;
      ls >> name;
      props.push_back({name, *sc});
    } else if (tok == "end_header") {
      break;
    } else if (tok == "obj_info") {
      // ignored
    } else {
      throw ParseError(path, lineno, "unexpected header token '" + tok + "'");
    }
  }
  if (!have_format) throw ParseError(path, lineno, "header has no format line");
  if (!seen_vertex_element) throw ParseError(path, lineno, "no vertex element");

  int ix = -1, iy = -1, iz = -1, ir = -1, ig = -1, ib = -1;
  for (size_t i = 0; i < props.size(); ++i) {
    const auto& n = props[i].name;
    if (n == "x") ix = int(i);
    else if (n == "y") iy = int(i);
    else if (n == "z") iz = int(i);
    else if (n == "red" || n == "diffuse_red") ir = int(i);
    else if (n == "green" || n == "diffuse_green") ig = int(i);
    else if (n == "blue" || n == "diffuse_blue") ib = int(i);
  }
  if (ix < 0 || iy < 0 || iz < 0)
    throw ParseError(path, lineno, "vertex element lacks x/y/z properties");
  const bool has_rgb = ir >= 0 && ig >= 0 && ib >= 0;

  cloud.xyz.reserve(vertex_count);
  if (has_rgb) cloud.rgb.reserve(vertex_count);

  if (binary) {
    size_t stride = 0;
    std::vector<size_t> offsets(props.size());
    for (size_t i = 0; i < props.size(); ++i) {
      offsets[i] = stride;
      stride += scalar_size(props[i].type);
    }
    std::vector<unsigned char> buf(stride * vertex_count);
    in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()));
    if (size_t(in.gcount()) != buf.size())
      throw ParseError(path, "truncated binary vertex data");
    for (size_t v = 0; v < vertex_count; ++v) {
      const unsigned char* rec = buf.data() + v * stride;
      auto get = [&](int i) {
        return detail::decode_scalar(rec + offsets[size_t(i)], props[size_t(i)].type);
      };
      cloud.xyz.emplace_back(get(ix), get(iy), get(iz));
      if (has_rgb)
        cloud.rgb.push_back(Color{uint8_t(get(ir)), uint8_t(get(ig)), uint8_t(get(ib))});
    }
  } else {
    std::vector<double> vals(props.size());
    std::string tok;
    for (size_t v = 0; v < vertex_count; ++v) {
      std::string data_line;
      if (!std::getline(in, data_line))
        throw ParseError(path, lineno, "truncated ascii vertex data at vertex " + std::to_string(v));
      ++lineno;
      std::istringstream ls(data_line);
      for (size_t i = 0; i < props.size(); ++i) {
        if (!(ls >> tok))
          throw ParseError(path, lineno, "bad vertex line (expected " +
                                             std::to_string(props.size()) + " values)");
        char* end = nullptr;
        vals[i] = std::strtod(tok.c_str(), &end);  // accepts nan/inf, unlike >>
        if (end == tok.c_str())
          throw ParseError(path, lineno, "bad vertex value '" + tok + "'");
        // float32 properties narrow to their stored precision so that ascii
        // and binary encodings of one cloud parse identically
        if (props[i].type == Scalar::F32) vals[i] = double(float(vals[i]));
      }
      cloud.xyz.emplace_back(vals[size_t(ix)], vals[size_t(iy)], vals[size_t(iz)]);
      if (has_rgb)
        cloud.rgb.push_back(Color{uint8_t(vals[size_t(ir)]), uint8_t(vals[size_t(ig)]),
                                  uint8_t(vals[size_t(ib)])});
    }
  }
  return cloud;
}

/// Writes vertices with float32 x/y/z and uchar red/green/blue. Binary files
/// are binary_little_endian and round-trip bit-exactly through read().
inline void write(const std::string& path, const std::vector<Vec3>& xyz,
                  const std::vector<Color>& rgb, bool binary = true,
                  const std::vector<std::string>& comments = {}) {
  if (path.empty()) throw IoError("empty PLY output path");
  if (!rgb.empty() && rgb.size() != xyz.size())
    throw ValidationError("PLY write: color count does not match point count");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write PLY file '" + path + "'");

  out << "ply\n";
  out << (binary ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n");
  for (const auto& c : comments) out << "comment " << c << "\n";
  out << "element vertex " << xyz.size() << "\n";
  out << "property float x\nproperty float y\nproperty float z\n";
  if (!rgb.empty())
    out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out << "end_header\n";

  if (binary) {
    for (size_t i = 0; i < xyz.size(); ++i) {
      float f[3] = {float(xyz[i].x()), float(xyz[i].y()), float(xyz[i].z())};
      out.write(reinterpret_cast<const char*>(f), 12);
      if (!rgb.empty()) {
        uint8_t c[3] = {rgb[i].r, rgb[i].g, rgb[i].b};
        out.write(reinterpret_cast<const char*>(c), 3);
      }
    }
  } else {
    std::ostringstream body;
    body.precision(9);  // float32 round-trips at 9 significant digits
    for (size_t i = 0; i < xyz.size(); ++i) {
      body << float(xyz[i].x()) << " " << float(xyz[i].y()) << " " << float(xyz[i].z());
      if (!rgb.empty())
        body << " " << int(rgb[i].r) << " " << int(rgb[i].g) << " " << int(rgb[i].b);
      body << "\n";
    }
    out << body.str();
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace acmap::ply
