#pragma once

#include "acmap/types.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace acmap {

template <typename T>
class Image {
public:
  Image() = default;
  Image(int width, int height, const T& fill = T{})
      : width_(width), height_(height), data_(size_t(width) * size_t(height), fill) {
    if (width <= 0 || height <= 0)
      throw ValidationError("image dimensions must be positive");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  size_t size() const { return data_.size(); }

  T& at(int x, int y) { return data_[idx(x, y)]; }
  const T& at(int x, int y) const { return data_[idx(x, y)]; }

  bool in_bounds(int x, int y) const {
    return x >= 0 && x < width_ && y >= 0 && y < height_;
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool operator==(const Image&) const = default;

private:
  size_t idx(int x, int y) const { return size_t(y) * size_t(width_) + size_t(x); }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

namespace imgio {

// ---- PGM / PPM ----

namespace detail {

inline int pnm_token(std::istream& in, const std::string& path) {
  // skips whitespace and '#' comments between header tokens
  while (true) {
    int c = in.peek();
    if (c == '#') {
      std::string rest;
      std::getline(in, rest);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  int v;
  if (!(in >> v)) throw ParseError(path, "bad PNM header value");
  return v;
}

}  // namespace detail

/// Reads P2 (ascii) or P5 (binary) PGM, 8-bit, into per-pixel values.
inline Image<uint8_t> read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open PGM '" + path + "'");
  std::string magic;
  in >> magic;
  if (magic != "P2" && magic != "P5")
    throw ParseError(path, "expected PGM magic P2 or P5, got '" + magic + "'");
  int w = detail::pnm_token(in, path);
  int h = detail::pnm_token(in, path);
  int maxval = detail::pnm_token(in, path);
  if (maxval <= 0 || maxval > 255)
    throw ParseError(path, "only 8-bit PGM is supported (maxval " +
                               std::to_string(maxval) + ")");
  Image<uint8_t> img(w, h);
  if (magic == "P5") {
    in.get();  // single whitespace after maxval
    in.read(reinterpret_cast<char*>(img.data().data()), std::streamsize(img.size()));
    if (size_t(in.gcount()) != img.size()) throw ParseError(path, "truncated PGM data");
  } else {
    for (size_t i = 0; i < img.size(); ++i) {
      int v;
      if (!(in >> v)) throw ParseError(path, "truncated PGM data");
      if (v < 0 || v > maxval) throw ParseError(path, "PGM sample out of range");
      img.data()[i] = uint8_t(v);
    }
  }
  return img;
}

inline void write_pgm(const Image<uint8_t>& img, const std::string& path,
                      bool binary = true) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write PGM '" + path + "'");
  out << (binary ? "P5\n" : "P2\n") << img.width() << " " << img.height() << "\n255\n";
  if (binary) {
    out.write(reinterpret_cast<const char*>(img.data().data()),
              std::streamsize(img.size()));
  } else {
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x)
        out << int(img.at(x, y)) << (x + 1 == img.width() ? "" : " ");
      out << "\n";
    }
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

/// 16-bit binary PGM (big-endian samples per the PNM spec); used for depth
/// dumps in millimetres.
inline void write_pgm16(const Image<uint16_t>& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write PGM '" + path + "'");
  out << "P5\n" << img.width() << " " << img.height() << "\n65535\n";
  for (uint16_t v : img.data()) {
    unsigned char be[2] = {static_cast<unsigned char>(v >> 8),
                           static_cast<unsigned char>(v & 0xff)};
    out.write(reinterpret_cast<const char*>(be), 2);
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline Image<Color> read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open PPM '" + path + "'");
  std::string magic;
  in >> magic;
  if (magic != "P3" && magic != "P6")
    throw ParseError(path, "expected PPM magic P3 or P6, got '" + magic + "'");
  int w = detail::pnm_token(in, path);
  int h = detail::pnm_token(in, path);
  int maxval = detail::pnm_token(in, path);
  if (maxval != 255) throw ParseError(path, "only maxval 255 PPM is supported");
  Image<Color> img(w, h);
  if (magic == "P6") {
    in.get();
    std::vector<unsigned char> buf(img.size() * 3);
    in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()));
    if (size_t(in.gcount()) != buf.size()) throw ParseError(path, "truncated PPM data");
    for (size_t i = 0; i < img.size(); ++i)
      img.data()[i] = Color{buf[3 * i], buf[3 * i + 1], buf[3 * i + 2]};
  } else {
    for (size_t i = 0; i < img.size(); ++i) {
      int r, g, b;
      if (!(in >> r >> g >> b)) throw ParseError(path, "truncated PPM data");
      img.data()[i] = Color{uint8_t(r), uint8_t(g), uint8_t(b)};
    }
  }
  return img;
}

inline void write_ppm(const Image<Color>& img, const std::string& path,
                      bool binary = true) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write PPM '" + path + "'");
  out << (binary ? "P6\n" : "P3\n") << img.width() << " " << img.height() << "\n255\n";
  if (binary) {
    std::vector<unsigned char> buf(img.size() * 3);
    for (size_t i = 0; i < img.size(); ++i) {
      buf[3 * i] = img.data()[i].r;
      buf[3 * i + 1] = img.data()[i].g;
      buf[3 * i + 2] = img.data()[i].b;
    }
    out.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size()));
  } else {
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        const Color& c = img.at(x, y);
        out << int(c.r) << " " << int(c.g) << " " << int(c.b)
            << (x + 1 == img.width() ? "" : " ");
      }
      out << "\n";
    }
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

// ---- PNG (libpng) ----

namespace detail {

struct PngReader {
  png_structp png = nullptr;
  png_infop info = nullptr;
  std::FILE* fp = nullptr;

  explicit PngReader(const std::string& path) {
    fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw IoError("cannot open PNG '" + path + "'");
    png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
      close();
      throw IoError("libpng init failed for '" + path + "'");
    }
  }
  ~PngReader() { close(); }
  void close() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    if (fp) std::fclose(fp);
    png = nullptr;
    info = nullptr;
    fp = nullptr;
  }
};

}  // namespace detail

/// Reads an 8-bit grayscale or palette PNG as raw per-pixel indices/values
/// (palette entries are NOT expanded: the palette index is the label id).
inline Image<uint8_t> read_png_index(const std::string& path) {
  detail::PngReader r(path);
  if (setjmp(png_jmpbuf(r.png))) throw ParseError(path, "libpng decode error");
  png_init_io(r.png, r.fp);
  png_read_info(r.png, r.info);
  png_uint_32 w, h;
  int bit_depth, color_type;
  png_get_IHDR(r.png, r.info, &w, &h, &bit_depth, &color_type, nullptr, nullptr, nullptr);
  if (color_type != PNG_COLOR_TYPE_GRAY && color_type != PNG_COLOR_TYPE_PALETTE)
    throw ParseError(path, "label-map PNG must be 8-bit grayscale or palette-indexed");
  if (bit_depth < 8) png_set_packing(r.png);
  if (bit_depth == 16) png_set_strip_16(r.png);
  png_read_update_info(r.png, r.info);
  Image<uint8_t> img{int(w), int(h)};
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y)
    rows[y] = img.data().data() + size_t(y) * w;
  png_read_image(r.png, rows.data());
  return img;
}

inline Image<Color> read_png_rgb(const std::string& path) {
  detail::PngReader r(path);
  if (setjmp(png_jmpbuf(r.png))) throw ParseError(path, "libpng decode error");
  png_init_io(r.png, r.fp);
  png_read_info(r.png, r.info);
  png_set_expand(r.png);
  png_set_strip_16(r.png);
  png_set_strip_alpha(r.png);
  png_set_gray_to_rgb(r.png);
  png_read_update_info(r.png, r.info);
  png_uint_32 w = png_get_image_width(r.png, r.info);
  png_uint_32 h = png_get_image_height(r.png, r.info);
  std::vector<unsigned char> buf(size_t(w) * h * 3);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = buf.data() + size_t(y) * w * 3;
  png_read_image(r.png, rows.data());
  Image<Color> img{int(w), int(h)};
  for (size_t i = 0; i < img.size(); ++i)
    img.data()[i] = Color{buf[3 * i], buf[3 * i + 1], buf[3 * i + 2]};
  return img;
}

namespace detail {

struct PngWriter {
  png_structp png = nullptr;
  png_infop info = nullptr;
  std::FILE* fp = nullptr;

  explicit PngWriter(const std::string& path) {
    fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw IoError("cannot write PNG '" + path + "'");
    png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
      close();
      throw IoError("libpng init failed for '" + path + "'");
    }
  }
  ~PngWriter() { close(); }
  void close() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    if (fp) std::fclose(fp);
    png = nullptr;
    info = nullptr;
    fp = nullptr;
  }
};

}  // namespace detail

inline void write_png_rgb(const Image<Color>& img, const std::string& path) {
  detail::PngWriter w(path);
  if (setjmp(png_jmpbuf(w.png))) throw IoError("libpng encode error for '" + path + "'");
  png_init_io(w.png, w.fp);
  png_set_IHDR(w.png, w.info, png_uint_32(img.width()), png_uint_32(img.height()), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(w.png, w.info);
  std::vector<unsigned char> row(size_t(img.width()) * 3);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const Color& c = img.at(x, y);
      row[3 * size_t(x)] = c.r;
      row[3 * size_t(x) + 1] = c.g;
      row[3 * size_t(x) + 2] = c.b;
    }
    png_write_row(w.png, row.data());
  }
  png_write_end(w.png, nullptr);
}

inline void write_png_gray(const Image<uint8_t>& img, const std::string& path) {
  detail::PngWriter w(path);
  if (setjmp(png_jmpbuf(w.png))) throw IoError("libpng encode error for '" + path + "'");
  png_init_io(w.png, w.fp);
  png_set_IHDR(w.png, w.info, png_uint_32(img.width()), png_uint_32(img.height()), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(w.png, w.info);
  for (int y = 0; y < img.height(); ++y)
    png_write_row(w.png, const_cast<png_bytep>(img.data().data() + size_t(y) * size_t(img.width())));
  png_write_end(w.png, nullptr);
}

}  // namespace imgio
}  // namespace acmap
