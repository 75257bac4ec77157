#pragma once

#include "acmap/types.hpp"

#include <cmath>

namespace acmap {

struct Lab {
  double l = 0.0;  // [0, 100]
  double a = 0.0;
  double b = 0.0;
};

/// sRGB (D65) -> CIELAB via linearization and the XYZ intermediate.
inline Lab rgb_to_lab(const Color& c) {
  auto linearize = [](uint8_t v8) {
    const double v = v8 / 255.0;
    return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
  };
  const double r = linearize(c.r), g = linearize(c.g), b = linearize(c.b);

  const double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
  const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
  const double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;

  // D65 reference white
  constexpr double xn = 0.95047, yn = 1.0, zn = 1.08883;
  auto f = [](double t) {
    constexpr double d = 6.0 / 29.0;
    return t > d * d * d ? std::cbrt(t) : t / (3.0 * d * d) + 4.0 / 29.0;
  };
  const double fx = f(x / xn), fy = f(y / yn), fz = f(z / zn);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

}  // namespace acmap
