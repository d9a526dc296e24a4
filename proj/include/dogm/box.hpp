#pragma once

#include <array>
#include <optional>
#include <vector>

#include "dogm/geometry.hpp"

namespace dogm {

/// Rotated rectangle in world coordinates. The length axis points along the
/// orientation; orientation is canonical modulo pi in [-pi/2, pi/2).
struct ObjectBox {
  double center_east = 0.0;
  double center_north = 0.0;
  double width = 0.0;   // across the orientation axis
  double length = 0.0;  // along the orientation axis
  double orientation = 0.0;
  std::optional<double> score;

  Eigen::Vector2d center() const { return {center_east, center_north}; }
  double area() const { return width * length; }

  static ObjectBox make(const Eigen::Vector2d& center, double width, double length,
                        double orientation, std::optional<double> score = std::nullopt) {
    return ObjectBox{center.x(), center.y(), width, length, wrap_half_angle(orientation), score};
  }

  /// Corners in counter-clockwise order.
  std::array<Eigen::Vector2d, 4> corners() const {
    const double c = std::cos(orientation);
    const double s = std::sin(orientation);
    const Eigen::Vector2d u{c, s};        // length axis
    const Eigen::Vector2d v{-s, c};       // width axis
    const Eigen::Vector2d hc = 0.5 * length * u;
    const Eigen::Vector2d hw = 0.5 * width * v;
    const Eigen::Vector2d ctr = center();
    return {ctr - hc - hw, ctr + hc - hw, ctr + hc + hw, ctr - hc + hw};
  }

  bool contains(const Eigen::Vector2d& p) const {
    const double c = std::cos(orientation);
    const double s = std::sin(orientation);
    const Eigen::Vector2d d = p - center();
    const double u = c * d.x() + s * d.y();
    const double v = -s * d.x() + c * d.y();
    return std::abs(u) <= 0.5 * length && std::abs(v) <= 0.5 * width;
  }
};

/// Intersection-over-union (Jaccard index) of two rotated rectangles,
/// computed by Sutherland-Hodgman polygon clipping. Symmetric, in [0, 1],
/// exactly 1 for identical point sets. Throws on degenerate zero-area boxes.
double rotated_iou(const ObjectBox& a, const ObjectBox& b);

/// Area of the intersection polygon of two rotated rectangles.
double intersection_area(const ObjectBox& a, const ObjectBox& b);

/// Convex hull (counter-clockwise, no collinear duplicates) of a point set.
std::vector<Eigen::Vector2d> convex_hull(std::vector<Eigen::Vector2d> points);

/// Minimum-area enclosing rotated rectangle of a point set (rotating
/// calipers over the convex hull). The result is canonicalized with
/// width <= length. Requires at least one point.
ObjectBox min_area_rect(const std::vector<Eigen::Vector2d>& points);

}  // namespace dogm
