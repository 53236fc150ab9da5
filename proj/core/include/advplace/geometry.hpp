#pragma once

#include <cmath>

namespace advplace {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

struct Velocity {
  double u = 0.0;
  double v = 0.0;
};

inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Axis-aligned rectangle [xmin, xmax] x [ymin, ymax] in meters.
struct Domain {
  double xmin = 0.0;
  double xmax = 1.0;
  double ymin = 0.0;
  double ymax = 1.0;

  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
  double area() const { return width() * height(); }

  bool contains(Point p) const {
    return p.x >= xmin && p.x <= xmax && p.y >= ymin && p.y <= ymax;
  }
  Point clamp(Point p) const;
  bool intersects(const Domain& other) const;

  /// Throws InputError unless the bounds are finite with xmax > xmin and ymax > ymin.
  void validate() const;

  friend bool operator==(const Domain&, const Domain&) = default;
};

}  // namespace advplace
