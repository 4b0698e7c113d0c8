#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace ues {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

/// Integer pixel coordinate; pixel (i, j) covers [i, i+1) x [j, j+1).
struct Pixel {
  int x = 0;
  int y = 0;

  friend bool operator==(const Pixel&, const Pixel&) = default;
  friend auto operator<=>(const Pixel&, const Pixel&) = default;
};

inline Point pixel_center(Pixel p) { return {p.x + 0.5, p.y + 0.5}; }

inline double squared_distance(Point a, Point b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

inline double distance(Point a, Point b) { return std::sqrt(squared_distance(a, b)); }

namespace geometry {

inline double cross(Point o, Point a, Point b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

inline bool on_segment(Point p, Point a, Point b) {
  const double len = std::max(std::abs(b.x - a.x), std::abs(b.y - a.y));
  if (std::abs(cross(a, b, p)) > 1e-12 * std::max(1.0, len)) return false;
  return p.x >= std::min(a.x, b.x) && p.x <= std::max(a.x, b.x) &&
         p.y >= std::min(a.y, b.y) && p.y <= std::max(a.y, b.y);
}

inline int orientation(Point a, Point b, Point c) {
  const double v = cross(a, b, c);
  if (v > 0) return 1;
  if (v < 0) return -1;
  return 0;
}

/// Closed-segment intersection test, collinear overlaps included.
inline bool segments_intersect(Point p1, Point p2, Point q1, Point q2) {
  const int o1 = orientation(p1, p2, q1);
  const int o2 = orientation(p1, p2, q2);
  const int o3 = orientation(q1, q2, p1);
  const int o4 = orientation(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(q1, p1, p2)) return true;
  if (o2 == 0 && on_segment(q2, p1, p2)) return true;
  if (o3 == 0 && on_segment(p1, q1, q2)) return true;
  if (o4 == 0 && on_segment(p2, q1, q2)) return true;
  return false;
}

inline double signed_area(std::span<const Point> poly) {
  double acc = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point& a = poly[i];
    const Point& b = poly[(i + 1) % poly.size()];
    acc += a.x * b.y - b.x * a.y;
  }
  return acc / 2.0;
}

/// A polygon is simple when it has at least three vertices, non-zero area,
/// and no two non-adjacent edges touch.
inline bool is_simple_polygon(std::span<const Point> poly) {
  const std::size_t n = poly.size();
  if (n < 3) return false;
  for (const Point& p : poly) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) return false;
  }
  if (std::abs(signed_area(poly)) <= 0.0) return false;
  for (std::size_t i = 0; i < n; ++i) {
    if (poly[i] == poly[(i + 1) % n]) return false;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Point a1 = poly[i];
    const Point a2 = poly[(i + 1) % n];
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
      const Point b1 = poly[j];
      const Point b2 = poly[(j + 1) % n];
      if (adjacent) {
        // Adjacent edges share one endpoint; folding back onto each other is
        // still a self-intersection.
        const Point shared = (j == i + 1) ? a2 : a1;
        const Point a_other = (j == i + 1) ? a1 : a2;
        const Point b_other = (j == i + 1) ? b2 : b1;
        if (orientation(shared, a_other, b_other) == 0 &&
            ((a_other.x - shared.x) * (b_other.x - shared.x) +
             (a_other.y - shared.y) * (b_other.y - shared.y)) > 0) {
          return false;
        }
        continue;
      }
      if (segments_intersect(a1, a2, b1, b2)) return false;
    }
  }
  return true;
}

/// Even-odd containment; points exactly on an edge count as inside.
inline bool contains(std::span<const Point> poly, Point p) {
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (on_segment(p, poly[i], poly[(i + 1) % n])) return true;
  }
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point& a = poly[i];
    const Point& b = poly[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x_cross = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside;
}

}  // namespace geometry
}  // namespace ues
