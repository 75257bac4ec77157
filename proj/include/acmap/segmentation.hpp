#pragma once

#include "acmap/image.hpp"
#include "acmap/lab.hpp"
#include "acmap/labelfield.hpp"
#include "acmap/material.hpp"
#include "acmap/types.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace acmap {

// ---- label map ingestion (the CNN stand-in) ----

/// Remap from an external classifier's ids onto the 9 semantic labels.
/// Unlisted source ids map to Unknown.
class LabelRemap {
public:
  LabelRemap() { table_.fill(uint8_t(SemanticLabel::Unknown)); }

  void set(uint8_t src, SemanticLabel dst) { table_[src] = uint8_t(dst); }
  SemanticLabel map(uint8_t src) const { return SemanticLabel(table_[src]); }

private:
  std::array<uint8_t, 256> table_;
};

/// Remap file: one "<source id> <label name or id>" pair per line.
inline LabelRemap load_label_remap(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open remap file '" + path + "'");
  LabelRemap remap;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::istringstream ls(t);
    int src;
    std::string dst;
    if (!(ls >> src >> dst) || src < 0 || src > 255)
      throw ParseError(path, lineno, "expected '<source id 0-255> <label>'");
    auto label = label_from_name(dst);
    if (!label) {
      try {
        int v = std::stoi(dst);
        if (v < 0 || v >= kLabelCount) throw std::out_of_range("label id");
        label = SemanticLabel(v);
      } catch (const std::exception&) {
        throw ParseError(path, lineno, "unknown label '" + dst + "'");
      }
    }
    remap.set(uint8_t(src), *label);
  }
  return remap;
}

inline Image<uint8_t> remap_label_map(const Image<uint8_t>& ids, const LabelRemap& remap) {
  Image<uint8_t> out(ids.width(), ids.height());
  for (size_t i = 0; i < ids.size(); ++i)
    out.data()[i] = uint8_t(remap.map(ids.data()[i]));
  return out;
}

inline LabelField one_hot(const Image<uint8_t>& ids) {
  LabelField lf(ids.width(), ids.height());
  for (size_t px = 0; px < lf.pixel_count(); ++px) {
    uint8_t id = ids.data()[px];
    if (id >= kLabelCount)
      throw ValidationError("label id " + std::to_string(id) +
                            " outside the closed set 0-8");
    lf.at(px)[id] = 1.0;
  }
  return lf;
}

/// Loads a hard label map (ids 0-8; PGM or indexed/gray PNG by extension)
/// into a one-hot field. Dimensions must match the reconstructed image.
inline LabelField load_label_map(const std::string& path, int width, int height,
                                 const LabelRemap* remap = nullptr) {
  Image<uint8_t> ids;
  if (path.size() > 4 && path.substr(path.size() - 4) == ".png")
    ids = imgio::read_png_index(path);
  else
    ids = imgio::read_pgm(path);
  if (ids.width() != width || ids.height() != height)
    throw ValidationError("'" + path + "': label map is " + std::to_string(ids.width()) +
                          "x" + std::to_string(ids.height()) + ", expected " +
                          std::to_string(width) + "x" + std::to_string(height));
  if (remap) ids = remap_label_map(ids, *remap);
  return one_hot(ids);
}

inline void save_label_map(const Image<uint8_t>& ids, const std::string& path) {
  if (path.size() > 4 && path.substr(path.size() - 4) == ".png")
    imgio::write_png_gray(ids, path);
  else
    imgio::write_pgm(ids, path);
}

inline Image<uint8_t> argmax_map(const LabelField& lf) {
  Image<uint8_t> ids(lf.width(), lf.height());
  for (int y = 0; y < lf.height(); ++y)
    for (int x = 0; x < lf.width(); ++x)
      ids.at(x, y) = uint8_t(lf.argmax(x, y));
  return ids;
}

// ---- unary potentials ----

/// Hard labels to soft unaries: the labelled class takes probability c, the
/// remaining eight share (1-c) evenly; Unknown pixels become uniform 1/9.
inline LabelField unary_from_labels(const LabelField& hard, double confidence) {
  if (!(confidence > 0.0 && confidence < 1.0))
    throw ValidationError("unary confidence must be in (0, 1)");
  LabelField out(hard.width(), hard.height());
  const double rest = (1.0 - confidence) / (kLabelCount - 1);
  for (int y = 0; y < hard.height(); ++y) {
    for (int x = 0; x < hard.width(); ++x) {
      SemanticLabel l = hard.argmax(x, y);
      double* q = out.at(x, y);
      if (l == SemanticLabel::Unknown) {
        std::fill(q, q + kLabelCount, 1.0 / kLabelCount);
      } else {
        std::fill(q, q + kLabelCount, rest);
        q[uint8_t(l)] = confidence;
      }
    }
  }
  return out;
}

// ---- dense CRF mean-field refinement ----

struct CrfParams {
  double w_app = 4.0;        // appearance kernel weight
  double theta_pos = 40.0;   // appearance position stddev, pixels
  double theta_lab = 10.0;   // appearance color stddev, LAB units
  double w_smooth = 2.0;     // smoothness kernel weight
  double theta_smooth = 3.0; // smoothness position stddev, pixels
  int iterations = 10;
  double confidence = 0.8;   // unary confidence for hard-label sources
  int downsample = 1;        // 1, 2 or 4: grid subsample before inference

  void validate() const {
    if (w_app < 0.0 || w_smooth < 0.0)
      throw ValidationError("CRF kernel weights must be >= 0");
    if (theta_pos <= 0.0 || theta_lab <= 0.0 || theta_smooth <= 0.0)
      throw ValidationError("CRF kernel stddevs must be > 0");
    if (iterations < 0 || iterations > 100)
      throw ValidationError("CRF iterations must be in [0, 100]");
    if (!(confidence > 0.0 && confidence < 1.0))
      throw ValidationError("CRF unary confidence must be in (0, 1)");
    if (downsample != 1 && downsample != 2 && downsample != 4)
      throw ValidationError("CRF downsample factor must be 1, 2 or 4");
  }
};

namespace crf_detail {

// One Jacobi mean-field update: fresh marginals computed from the previous
// iteration's Q for every pixel simultaneously. Message passing is the exact
// O(N^2) pairwise sum with the Gaussian appearance (position+LAB) and
// smoothness (position) kernels, self-interaction excluded; compatibility is
// Potts with penalty 1.
inline void mean_field_step(const LabelField& unary_neglog, const std::vector<Lab>& lab,
                            int width, const CrfParams& p, const LabelField& q_prev,
                            LabelField& q_next, unsigned n_threads) {
  const size_t n = q_prev.pixel_count();
  const double inv2_pos = 0.5 / (p.theta_pos * p.theta_pos);
  const double inv2_lab = 0.5 / (p.theta_lab * p.theta_lab);
  const double inv2_smooth = 0.5 / (p.theta_smooth * p.theta_smooth);

  auto worker = [&](size_t begin, size_t end) {
    std::array<double, kLabelCount> msg;
    for (size_t i = begin; i < end; ++i) {
      msg.fill(0.0);
      const double xi = double(i % size_t(width));
      const double yi = double(i / size_t(width));
      const Lab& li = lab[i];
      for (size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double dx = xi - double(j % size_t(width));
        const double dy = yi - double(j / size_t(width));
        const double d2 = dx * dx + dy * dy;
        const Lab& lj = lab[j];
        const double dl = li.l - lj.l, da = li.a - lj.a, db = li.b - lj.b;
        const double c2 = dl * dl + da * da + db * db;
        const double k = p.w_app * std::exp(-d2 * inv2_pos - c2 * inv2_lab) +
                         p.w_smooth * std::exp(-d2 * inv2_smooth);
        const double* qj = q_prev.at(j);
        for (int l = 0; l < kLabelCount; ++l) msg[l] += k * qj[l];
      }
      double msg_sum = 0.0;
      for (int l = 0; l < kLabelCount; ++l) msg_sum += msg[l];

      // Potts pairwise energy for label l is the mass of disagreeing labels.
      std::array<double, kLabelCount> energy;
      double e_min = std::numeric_limits<double>::infinity();
      const double* u = unary_neglog.at(i);
      for (int l = 0; l < kLabelCount; ++l) {
        energy[l] = u[l] + (msg_sum - msg[l]);
        e_min = std::min(e_min, energy[l]);
      }
      double* qi = q_next.at(i);
      double norm = 0.0;
      for (int l = 0; l < kLabelCount; ++l) {
        qi[l] = std::exp(-(energy[l] - e_min));
        norm += qi[l];
      }
      for (int l = 0; l < kLabelCount; ++l) qi[l] /= norm;
    }
  };

  if (n_threads <= 1 || n < 4096) {
    worker(0, n);
    return;
  }
  std::vector<std::thread> pool;
  const size_t chunk = (n + n_threads - 1) / n_threads;
  for (unsigned t = 0; t < n_threads; ++t) {
    const size_t b = t * chunk;
    if (b >= n) break;
    pool.emplace_back(worker, b, std::min(b + chunk, n));
  }
  for (auto& th : pool) th.join();
}

}  // namespace crf_detail

/// Fully-connected CRF mean-field refinement of a per-pixel label
/// distribution, with Gaussian position and LAB-color pairwise kernels and
/// Potts compatibility. T = 0 returns the unary unchanged. With downsample
/// f > 1 the field is inferred on an f-subsampled grid (kernel stddevs
/// rescaled accordingly) and upsampled nearest-neighbour.
inline LabelField densecrf_refine(const LabelField& unary, const Image<Color>& colors,
                                  const CrfParams& params, unsigned n_threads = 0) {
  params.validate();
  if (unary.width() != colors.width() || unary.height() != colors.height())
    throw ValidationError("unary and color image dimensions do not match");
  if (params.iterations == 0) return unary;
  if (n_threads == 0) n_threads = std::max(1u, std::thread::hardware_concurrency());

  const int f = params.downsample;
  if (f > 1 && (unary.width() > f && unary.height() > f)) {
    const int sw = (unary.width() + f - 1) / f;
    const int sh = (unary.height() + f - 1) / f;
    LabelField sub_unary(sw, sh);
    Image<Color> sub_colors(sw, sh);
    for (int y = 0; y < sh; ++y)
      for (int x = 0; x < sw; ++x) {
        const double* src = unary.at(x * f, y * f);
        std::copy(src, src + kLabelCount, sub_unary.at(x, y));
        sub_colors.at(x, y) = colors.at(x * f, y * f);
      }
    CrfParams sub = params;
    sub.downsample = 1;
    sub.theta_pos = std::max(params.theta_pos / f, 1e-6);
    sub.theta_smooth = std::max(params.theta_smooth / f, 1e-6);
    LabelField refined = densecrf_refine(sub_unary, sub_colors, sub, n_threads);
    LabelField out(unary.width(), unary.height());
    for (int y = 0; y < unary.height(); ++y)
      for (int x = 0; x < unary.width(); ++x) {
        const double* src = refined.at(std::min(x / f, sw - 1), std::min(y / f, sh - 1));
        std::copy(src, src + kLabelCount, out.at(x, y));
      }
    return out;
  }

  // negative-log unaries, clamped away from log(0)
  LabelField neglog(unary.width(), unary.height());
  for (size_t i = 0; i < unary.data().size(); ++i)
    neglog.data()[i] = -std::log(std::max(unary.data()[i], 1e-300));

  std::vector<Lab> lab(colors.size());
  for (size_t i = 0; i < colors.size(); ++i) lab[i] = rgb_to_lab(colors.data()[i]);

  LabelField q = unary;
  LabelField q_next(unary.width(), unary.height());
  for (int t = 0; t < params.iterations; ++t) {
    crf_detail::mean_field_step(neglog, lab, unary.width(), params, q, q_next, n_threads);
    std::swap(q, q_next);
  }
  return q;
}

// ---- probability tensor file ----

/// Float32 tensor dump: magic "ACPT", u32 width/height/labels, then
/// row-major pixel-major float32 probabilities.
inline void save_prob_tensor(const LabelField& lf, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write probability tensor '" + path + "'");
  out.write("ACPT", 4);
  uint32_t dims[3] = {uint32_t(lf.width()), uint32_t(lf.height()), kLabelCount};
  out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  std::vector<float> buf(lf.data().size());
  for (size_t i = 0; i < buf.size(); ++i) buf[i] = float(lf.data()[i]);
  out.write(reinterpret_cast<const char*>(buf.data()),
            std::streamsize(buf.size() * sizeof(float)));
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline LabelField load_prob_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open probability tensor '" + path + "'");
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::string(magic, 4) != "ACPT")
    throw ParseError(path, "bad magic (expected ACPT)");
  uint32_t dims[3];
  in.read(reinterpret_cast<char*>(dims), sizeof(dims));
  if (!in || dims[2] != kLabelCount)
    throw ParseError(path, "bad tensor header");
  LabelField lf{int(dims[0]), int(dims[1])};
  std::vector<float> buf(lf.data().size());
  in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size() * sizeof(float)));
  if (size_t(in.gcount()) != buf.size() * sizeof(float))
    throw ParseError(path, "truncated tensor data");
  for (size_t i = 0; i < buf.size(); ++i) lf.data()[i] = buf[i];
  return lf;
}

}  // namespace acmap
