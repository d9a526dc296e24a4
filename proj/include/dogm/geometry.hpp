#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace dogm {

// Dense per-cell plane. Row index is the north cell index n, column index is
// the east cell index e; row-major storage makes east the fast axis, so
// plane.data()[n * W + e] matches the on-disk channel layout.
template <class Scalar>
using Plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using GridPlane = Plane<float>;
using MaskPlane = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Wraps an angle to [-pi, pi).
inline double wrap_angle(double a) {
  a = std::fmod(a + kPi, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  return a - kPi;
}

/// Wraps an angle to [-pi/2, pi/2); rectangle orientations are modulo pi.
inline double wrap_half_angle(double a) {
  a = std::fmod(a + kPi / 2.0, kPi);
  if (a < 0.0) a += kPi;
  return a - kPi / 2.0;
}

struct Pose2 {
  double east = 0.0;
  double north = 0.0;
  double heading = 0.0;

  Eigen::Vector2d position() const { return {east, north}; }
};

/// Axis-aligned world grid. Cell (e, n) covers the half-open square
/// [origin + (e, n) * cell_size, origin + (e + 1, n + 1) * cell_size).
struct GridGeometry {
  int width_cells = 0;   // east extent
  int height_cells = 0;  // north extent
  double cell_size = 0.15;
  Eigen::Vector2d origin{0.0, 0.0};  // world (east, north) of the (0,0) cell corner

  bool valid() const {
    return width_cells > 0 && height_cells > 0 && cell_size > 0.0;
  }

  Eigen::Vector2d cell_center(int e, int n) const {
    return origin + cell_size * Eigen::Vector2d(e + 0.5, n + 0.5);
  }

  /// Fractional cell coordinates of a world point (0.5 offsets at centers).
  Eigen::Vector2d world_to_grid(const Eigen::Vector2d& p) const {
    return (p - origin) / cell_size;
  }

  /// Integer cell containing a world point; may lie outside the grid.
  Eigen::Vector2i world_to_cell(const Eigen::Vector2d& p) const {
    const Eigen::Vector2d g = world_to_grid(p);
    return {static_cast<int>(std::floor(g.x())), static_cast<int>(std::floor(g.y()))};
  }

  bool contains_cell(int e, int n) const {
    return e >= 0 && e < width_cells && n >= 0 && n < height_cells;
  }

  bool contains_point(const Eigen::Vector2d& p) const {
    const Eigen::Vector2i c = world_to_cell(p);
    return contains_cell(c.x(), c.y());
  }

  Eigen::Vector2d extent() const {
    return cell_size * Eigen::Vector2d(width_cells, height_cells);
  }

  friend bool operator==(const GridGeometry& a, const GridGeometry& b) {
    return a.width_cells == b.width_cells && a.height_cells == b.height_cells &&
           a.cell_size == b.cell_size && a.origin == b.origin;
  }
};

inline void require(bool cond, const char* what) {
  if (!cond) throw std::invalid_argument(what);
}

}  // namespace dogm
