#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "diagraph/errors.hpp"

namespace diagraph {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline bool operator==(const Point& a, const Point& b) {
  return a.x == b.x && a.y == b.y;
}

// Vertices in pixel coordinates, origin top-left, implicitly closed.
struct Polygon {
  std::vector<Point> vertices;
};

// 4-d per-node layout vector. All zero for group / image-constant nodes.
struct LayoutFeatures {
  double cx = 0.0;          // bbox centre x / image width
  double cy = 0.0;          // bbox centre y / image height
  double area_ratio = 0.0;  // polygon area / image area
  double solidity = 0.0;    // polygon area / convex hull area

  std::vector<double> as_vector() const { return {cx, cy, area_ratio, solidity}; }
};

inline double cross(const Point& o, const Point& a, const Point& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Absolute shoelace area; orientation-independent.
inline double polygon_area(const Polygon& p) {
  const auto& v = p.vertices;
  if (v.size() < 3) {
    throw GeometryError("polygon_area: need at least 3 vertices, got " +
                        std::to_string(v.size()));
  }
  double twice = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Point& a = v[i];
    const Point& b = v[(i + 1) % v.size()];
    twice += a.x * b.y - b.x * a.y;
  }
  return 0.5 * std::abs(twice);
}

// Andrew's monotone chain. Hull vertices counter-clockwise in a y-up frame
// (strict turns, so collinear boundary points are dropped).
inline Polygon convex_hull(const std::vector<Point>& points) {
  if (points.size() < 3) {
    throw GeometryError("convex_hull: need at least 3 points");
  }
  std::vector<Point> pts = points;
  std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

  const std::size_t n = pts.size();
  std::vector<Point> hull(2 * n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {  // lower
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = n - 1, lo = k + 1; i-- > 0;) {  // upper
    while (k >= lo && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k > 0 ? k - 1 : 0);  // last point repeats the first
  if (hull.size() < 3) {
    throw GeometryError("convex_hull: input points are collinear");
  }
  return Polygon{hull};
}

// Polygon area over convex hull area, in (0, 1].
inline double solidity(const Polygon& p) {
  const double area = polygon_area(p);
  const Polygon hull = convex_hull(p.vertices);
  const double hull_area = polygon_area(hull);
  if (hull_area <= 0.0) {
    throw GeometryError("solidity: zero-area convex hull");
  }
  return std::min(area / hull_area, 1.0);
}

struct BoundingBox {
  double min_x = 0.0, min_y = 0.0, max_x = 0.0, max_y = 0.0;
};

inline BoundingBox bounding_box(const Polygon& p) {
  if (p.vertices.empty()) throw GeometryError("bounding_box: empty polygon");
  BoundingBox b{p.vertices[0].x, p.vertices[0].y, p.vertices[0].x, p.vertices[0].y};
  for (const Point& v : p.vertices) {
    b.min_x = std::min(b.min_x, v.x);
    b.min_y = std::min(b.min_y, v.y);
    b.max_x = std::max(b.max_x, v.x);
    b.max_y = std::max(b.max_y, v.y);
  }
  return b;
}

// Geometry-free nodes (groups, image constants) get the zero vector.
inline LayoutFeatures layout_features(const std::optional<Polygon>& poly,
                                      double image_w, double image_h) {
  if (image_w <= 0.0 || image_h <= 0.0) {
    throw GeometryError("layout_features: image dimensions must be positive");
  }
  if (!poly.has_value()) return LayoutFeatures{};
  const BoundingBox b = bounding_box(*poly);
  LayoutFeatures f;
  f.cx = 0.5 * (b.min_x + b.max_x) / image_w;
  f.cy = 0.5 * (b.min_y + b.max_y) / image_h;
  f.area_ratio = polygon_area(*poly) / (image_w * image_h);
  f.solidity = solidity(*poly);
  return f;
}

inline Polygon rectangle_polygon(double x0, double y0, double x1, double y1) {
  return Polygon{{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}};
}

}  // namespace diagraph
