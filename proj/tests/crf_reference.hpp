#pragma once

// Brute-force O(N^2 * L^2) single-step mean-field reference, written as a
// direct transliteration of the update rule and kept independent of the
// production message-passing path. Test-only code.

#include "acmap/image.hpp"
#include "acmap/lab.hpp"
#include "acmap/labelfield.hpp"
#include "acmap/segmentation.hpp"

#include <cmath>

namespace crf_reference {

inline double pair_kernel(int xi, int yi, const acmap::Lab& ci, int xj, int yj,
                          const acmap::Lab& cj, const acmap::CrfParams& p) {
  const double d2 = double(xi - xj) * (xi - xj) + double(yi - yj) * (yi - yj);
  const double c2 = (ci.l - cj.l) * (ci.l - cj.l) + (ci.a - cj.a) * (ci.a - cj.a) +
                    (ci.b - cj.b) * (ci.b - cj.b);
  return p.w_app * std::exp(-d2 / (2.0 * p.theta_pos * p.theta_pos) -
                            c2 / (2.0 * p.theta_lab * p.theta_lab)) +
         p.w_smooth * std::exp(-d2 / (2.0 * p.theta_smooth * p.theta_smooth));
}

/// One mean-field update of `q0` under `unary`, every pairwise term summed
/// explicitly per label pair (Potts: only differing labels contribute).
inline acmap::LabelField step(const acmap::LabelField& unary, const acmap::LabelField& q0,
                              const acmap::Image<acmap::Color>& colors,
                              const acmap::CrfParams& p) {
  using namespace acmap;
  const int w = unary.width(), h = unary.height();
  LabelField out(w, h);
  for (int yi = 0; yi < h; ++yi) {
    for (int xi = 0; xi < w; ++xi) {
      const Lab ci = rgb_to_lab(colors.at(xi, yi));
      double norm = 0.0;
      for (int l = 0; l < kLabelCount; ++l) {
        double energy = -std::log(std::max(unary.at(xi, yi)[l], 1e-300));
        for (int yj = 0; yj < h; ++yj) {
          for (int xj = 0; xj < w; ++xj) {
            if (xi == xj && yi == yj) continue;
            const double k =
                pair_kernel(xi, yi, ci, xj, yj, rgb_to_lab(colors.at(xj, yj)), p);
            for (int lp = 0; lp < kLabelCount; ++lp) {
              if (lp == l) continue;  // Potts: agreeing labels cost nothing
              energy += k * q0.at(xj, yj)[lp];
            }
          }
        }
        out.at(xi, yi)[l] = std::exp(-energy);
        norm += out.at(xi, yi)[l];
      }
      for (int l = 0; l < kLabelCount; ++l) out.at(xi, yi)[l] /= norm;
    }
  }
  return out;
}

}  // namespace crf_reference
