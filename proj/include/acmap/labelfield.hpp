#pragma once

#include "acmap/material.hpp"
#include "acmap/types.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace acmap {

/// Per-pixel probability distribution over the 9 semantic labels.
/// Row-major, pixel-major storage: p[(y*width + x)*9 + label].
class LabelField {
public:
  LabelField() = default;
  LabelField(int width, int height)
      : width_(width), height_(height),
        p_(size_t(width) * size_t(height) * kLabelCount, 0.0) {
    if (width <= 0 || height <= 0)
      throw ValidationError("label field dimensions must be positive");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  size_t pixel_count() const { return size_t(width_) * size_t(height_); }

  double* at(int x, int y) { return p_.data() + idx(x, y) * kLabelCount; }
  const double* at(int x, int y) const { return p_.data() + idx(x, y) * kLabelCount; }
  double* at(size_t pixel) { return p_.data() + pixel * kLabelCount; }
  const double* at(size_t pixel) const { return p_.data() + pixel * kLabelCount; }

  double probability(int x, int y, SemanticLabel l) const {
    return at(x, y)[static_cast<uint8_t>(l)];
  }

  /// Argmax label; ties resolve to the lowest label id.
  SemanticLabel argmax(int x, int y) const {
    const double* q = at(x, y);
    int best = 0;
    for (int l = 1; l < kLabelCount; ++l)
      if (q[l] > q[best]) best = l;
    return static_cast<SemanticLabel>(best);
  }

  /// Checks that every pixel is a distribution (non-negative, sums to 1
  /// within tol).
  void validate(double tol = 1e-6) const {
    for (size_t px = 0; px < pixel_count(); ++px) {
      const double* q = at(px);
      double sum = 0.0;
      for (int l = 0; l < kLabelCount; ++l) {
        if (!(q[l] >= 0.0))
          throw ValidationError("label probability negative or NaN at pixel " +
                                std::to_string(px));
        sum += q[l];
      }
      if (std::abs(sum - 1.0) > tol)
        throw ValidationError("label probabilities at pixel " + std::to_string(px) +
                              " sum to " + std::to_string(sum));
    }
  }

  std::vector<double>& data() { return p_; }
  const std::vector<double>& data() const { return p_; }

  bool operator==(const LabelField&) const = default;

private:
  size_t idx(int x, int y) const { return size_t(y) * size_t(width_) + size_t(x); }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> p_;
};

}  // namespace acmap
