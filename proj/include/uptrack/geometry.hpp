#pragma once

#include <algorithm>
#include <cmath>

#include "uptrack/errors.hpp"

namespace uptrack {

// Axis-aligned box, top-left (x, y) plus size. Stored as double so subpixel
// tracker output round-trips without drift.
struct Box {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double cx() const { return x + w / 2.0; }
  double cy() const { return y + h / 2.0; }
  double area() const { return w * h; }
  double diag() const { return std::sqrt(w * w + h * h); }
};

inline bool box_degenerate(const Box& b) { return !(b.w > 0.0) || !(b.h > 0.0); }

// Intersection-over-union; zero-size operands give 0, negative sizes are
// rejected.
inline double iou(const Box& a, const Box& b) {
  if (a.w < 0.0 || a.h < 0.0 || b.w < 0.0 || b.h < 0.0)
    throw validation_error("iou: negative box dimensions");
  if (box_degenerate(a) || box_degenerate(b)) return 0.0;
  const double ix0 = std::max(a.x, b.x);
  const double iy0 = std::max(a.y, b.y);
  const double ix1 = std::min(a.x + a.w, b.x + b.w);
  const double iy1 = std::min(a.y + a.h, b.y + b.h);
  const double iw = ix1 - ix0;
  const double ih = iy1 - iy0;
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

inline double center_distance(const Box& a, const Box& b) {
  const double dx = a.cx() - b.cx();
  const double dy = a.cy() - b.cy();
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace uptrack
