#ifndef ROIKIT_GEOMETRY_HPP
#define ROIKIT_GEOMETRY_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "roikit/tensor.hpp"

namespace roikit {

/// Axis-aligned box in image pixels, corners (x1, y1) and (x2, y2).
struct Box {
  Real x1 = 0;
  Real y1 = 0;
  Real x2 = 0;
  Real y2 = 0;

  Real width() const noexcept { return x2 - x1; }
  Real height() const noexcept { return y2 - y1; }
  Real area() const noexcept { return width() * height(); }

  bool well_formed() const noexcept {
    return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2) && x2 > x1 &&
           y2 > y1;
  }

  friend bool operator==(const Box&, const Box&) = default;
};

/// A proposal projected onto a batch of feature maps.
struct Roi {
  Box box;
  std::size_t batch_index = 0;

  friend bool operator==(const Roi&, const Roi&) = default;
};

inline Real intersection_area(const Box& a, const Box& b) noexcept {
  const Real w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const Real h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (w <= 0 || h <= 0) return 0;
  return w * h;
}

/// Intersection over union in [0, 1]; symmetric in its arguments.
inline Real iou(const Box& a, const Box& b) noexcept {
  const Real inter = intersection_area(a, b);
  if (inter <= 0) return 0;
  const Real uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, Real{0}, Real{1});
}

}  // namespace roikit

#endif  // ROIKIT_GEOMETRY_HPP
