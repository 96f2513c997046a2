#pragma once

#include <algorithm>
#include <cmath>

namespace t2 {

// Axis-aligned box, corner format, pixel units.
struct Box {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double cx() const { return 0.5 * (x1 + x2); }
  double cy() const { return 0.5 * (y1 + y2); }
  double area() const { return width() * height(); }

  static Box from_center(double cx, double cy, double w, double h) {
    return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
  }
};

inline bool box_valid(const Box& b) {
  return std::isfinite(b.x1) && std::isfinite(b.y1) && std::isfinite(b.x2) &&
         std::isfinite(b.y2) && b.x1 < b.x2 && b.y1 < b.y2;
}

inline double iou(const Box& a, const Box& b) {
  const double ix = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double iy = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (ix <= 0 || iy <= 0) return 0.0;
  const double inter = ix * iy;
  return inter / (a.area() + b.area() - inter);
}

struct Annotation {
  Box box;
  int class_id = 0;
};

struct Detection {
  Box box;
  int class_id = 0;
  double score = 0;
};

}  // namespace t2
