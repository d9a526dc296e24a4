#pragma once

#include <functional>

#include "dogm/box.hpp"
#include "dogm/grid.hpp"
#include "dogm/scenario.hpp"

namespace dogm {

/// Measurement masses deposited by one scan; weak single-scan evidence so
/// fusion over frames stays observable.
struct InverseSensorModel {
  double p_hit = 0.75;
  double p_free = 0.45;
};

enum class CellLabel : std::uint8_t {
  kFree = 0,
  kStatic = 1,
  kDynamic = 2,
  kUnobservable = 3,
};

struct GroundTruthBox {
  ObjectBox box;
  bool dynamic = false;  // dynamic kind moving faster than the static-speed threshold
  double speed = 0.0;
  int object_index = 0;
};

struct GroundTruth {
  double timestamp = 0.0;
  std::vector<GroundTruthBox> boxes;
  MaskPlane mask;  // height_cells x width_cells of CellLabel
};

/// Below this centroid speed a dynamic-kind object still counts as static in
/// cell labels; the static/dynamic split is behavioral.
inline constexpr double kStaticSpeedThreshold = 0.1;

/// Casts one ray against an object rectangle; returns the entry distance, or
/// nothing when the ray misses. Distances <= 0 (origin inside) clamp to 0.
std::optional<double> ray_box_intersection(const Eigen::Vector2d& origin,
                                           const Eigen::Vector2d& dir, const ObjectBox& box);

/// Simulates one lidar revolution at time t. Beams are uniformly spaced over
/// the angular span centred on the ego heading; each reports the nearest
/// object intersection plus Gaussian range noise, or a miss. Deterministic
/// per (scenario seed, frame index derived from t, beam index).
LidarScan simulate_scan(const ScenarioSpec& scenario, double t);

/// Rasterizes a scan into per-cell measurement masses (channels kMeasOcc,
/// kMeasFree). Beam rays are marched cell-by-cell; repeated evidence in one
/// cell combines with Dempster's rule.
GridFrame scan_to_measurement_grid(const LidarScan& scan, const GridGeometry& geometry,
                                   const Pose2& ego_pose,
                                   const InverseSensorModel& model = {});

/// Exact simulated state at time t: object rectangles with dynamic flags and
/// a per-cell {free, static, dynamic, unobservable} mask. Cells outside every
/// beam's reach (occluded, beyond range or outside the angular span) are
/// unobservable; object interiors behind the visible surface band count as
/// occluded.
GroundTruth ground_truth(const ScenarioSpec& scenario, double t);

/// Visits every cell a world-space segment passes through, in order.
/// Callback returns false to stop early.
void march_cells(const GridGeometry& geometry, const Eigen::Vector2d& from,
                 const Eigen::Vector2d& to, const std::function<bool(int, int)>& visit);

/// Convenience: all measurement frames of a scenario.
std::vector<GridFrame> simulate_measurement_sequence(const ScenarioSpec& scenario,
                                                     const InverseSensorModel& model = {});

}  // namespace dogm
