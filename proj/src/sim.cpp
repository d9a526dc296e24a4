#include "dogm/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dogm/rng.hpp"

namespace dogm {

std::optional<double> ray_box_intersection(const Eigen::Vector2d& origin,
                                           const Eigen::Vector2d& dir, const ObjectBox& box) {
  // Slab test in the box frame.
  const double c = std::cos(box.orientation);
  const double s = std::sin(box.orientation);
  const Eigen::Vector2d rel = origin - box.center();
  const Eigen::Vector2d o{c * rel.x() + s * rel.y(), -s * rel.x() + c * rel.y()};
  const Eigen::Vector2d d{c * dir.x() + s * dir.y(), -s * dir.x() + c * dir.y()};
  const double half[2] = {0.5 * box.length, 0.5 * box.width};

  double tmin = -std::numeric_limits<double>::infinity();
  double tmax = std::numeric_limits<double>::infinity();
  for (int axis = 0; axis < 2; ++axis) {
    if (std::abs(d[axis]) < 1e-15) {
      if (std::abs(o[axis]) > half[axis]) return std::nullopt;
      continue;
    }
    double t0 = (-half[axis] - o[axis]) / d[axis];
    double t1 = (half[axis] - o[axis]) / d[axis];
    if (t0 > t1) std::swap(t0, t1);
    tmin = std::max(tmin, t0);
    tmax = std::min(tmax, t1);
    if (tmin > tmax) return std::nullopt;
  }
  if (tmax < 0.0) return std::nullopt;
  return std::max(tmin, 0.0);
}

LidarScan simulate_scan(const ScenarioSpec& scenario, double t) {
  scenario.validate();
  require(t >= 0.0 && t <= scenario.duration, "simulate_scan: t outside scenario duration");

  const Pose2 ego = scenario.ego_pose_at(t);
  const SensorSpec& sensor = scenario.sensor;
  const std::uint64_t frame_index =
      static_cast<std::uint64_t>(std::llround(t * scenario.frame_rate));

  std::vector<ObjectBox> boxes;
  boxes.reserve(scenario.objects.size());
  for (const ObjectSpec& obj : scenario.objects) {
    const Pose2 p = obj.pose_at(t);
    boxes.push_back(ObjectBox::make(p.position(), obj.width, obj.length, p.heading));
  }

  LidarScan scan;
  scan.timestamp = t;
  scan.max_range = sensor.max_range;
  scan.beams.reserve(sensor.beam_count);
  const double step = sensor.angular_span / sensor.beam_count;
  const double first = ego.heading - 0.5 * sensor.angular_span + 0.5 * step;
  for (int b = 0; b < sensor.beam_count; ++b) {
    LidarBeam beam;
    beam.azimuth = first + b * step;
    const Eigen::Vector2d dir{std::cos(beam.azimuth), std::sin(beam.azimuth)};

    double nearest = std::numeric_limits<double>::infinity();
    for (const ObjectBox& box : boxes) {
      if (const auto hit = ray_box_intersection(ego.position(), dir, box))
        nearest = std::min(nearest, *hit);
    }

    Rng rng(derive_seed(scenario.rng_seed, frame_index, static_cast<std::uint64_t>(b)));
    const bool dropped = rng.uniform() < sensor.dropout_prob;
    const double noise = rng.gaussian(0.0, sensor.range_noise_sigma);
    if (!dropped && nearest <= sensor.max_range) {
      beam.hit = true;
      beam.range = std::clamp(nearest + noise, 1e-9, sensor.max_range);
    }
    scan.beams.push_back(beam);
  }
  return scan;
}

void march_cells(const GridGeometry& geometry, const Eigen::Vector2d& from,
                 const Eigen::Vector2d& to, const std::function<bool(int, int)>& visit) {
  // Amanatides-Woo traversal in fractional grid coordinates.
  const Eigen::Vector2d a = geometry.world_to_grid(from);
  const Eigen::Vector2d b = geometry.world_to_grid(to);
  const Eigen::Vector2d d = b - a;
  const double len = d.norm();

  int e = static_cast<int>(std::floor(a.x()));
  int n = static_cast<int>(std::floor(a.y()));
  const int e_end = static_cast<int>(std::floor(b.x()));
  const int n_end = static_cast<int>(std::floor(b.y()));

  const int step_e = d.x() > 0.0 ? 1 : (d.x() < 0.0 ? -1 : 0);
  const int step_n = d.y() > 0.0 ? 1 : (d.y() < 0.0 ? -1 : 0);
  const double inf = std::numeric_limits<double>::infinity();
  // Parameter t in [0, 1] along the segment at which the next cell border is crossed.
  double t_max_e = inf, t_max_n = inf, t_delta_e = inf, t_delta_n = inf;
  if (step_e != 0) {
    const double border = step_e > 0 ? std::floor(a.x()) + 1.0 : std::floor(a.x());
    t_max_e = (border - a.x()) / d.x();
    t_delta_e = 1.0 / std::abs(d.x());
  }
  if (step_n != 0) {
    const double border = step_n > 0 ? std::floor(a.y()) + 1.0 : std::floor(a.y());
    t_max_n = (border - a.y()) / d.y();
    t_delta_n = 1.0 / std::abs(d.y());
  }

  bool was_inside = false;
  for (int guard = 0; guard < 4 * (geometry.width_cells + geometry.height_cells) + 8; ++guard) {
    const bool inside = geometry.contains_cell(e, n);
    if (inside) {
      was_inside = true;
      if (!visit(e, n)) return;
    } else if (was_inside) {
      return;  // a straight segment never re-enters the grid
    }
    if (e == e_end && n == n_end) return;
    if (len == 0.0) return;
    if (t_max_e < t_max_n) {
      e += step_e;
      t_max_e += t_delta_e;
    } else {
      n += step_n;
      t_max_n += t_delta_n;
    }
  }
}

GridFrame scan_to_measurement_grid(const LidarScan& scan, const GridGeometry& geometry,
                                   const Pose2& ego_pose, const InverseSensorModel& model) {
  require(geometry.valid(), "scan_to_measurement_grid: invalid geometry");
  require(geometry.contains_point(ego_pose.position()),
          "scan_to_measurement_grid: ego pose outside grid");

  Plane<double> occ = Plane<double>::Zero(geometry.height_cells, geometry.width_cells);
  Plane<double> fre = Plane<double>::Zero(geometry.height_cells, geometry.width_cells);
  const Mass hit_mass{model.p_hit, 0.0};
  const Mass free_mass{0.0, model.p_free};

  auto deposit = [&](int e, int n, const Mass& m) {
    const Mass combined = ds_combine(Mass{occ(n, e), fre(n, e)}, m);
    occ(n, e) = combined.occ;
    fre(n, e) = combined.free;
  };

  require(scan.max_range > 0.0, "scan_to_measurement_grid: scan carries no max range");
  const Eigen::Vector2d origin = ego_pose.position();
  for (const LidarBeam& beam : scan.beams) {
    const Eigen::Vector2d dir{std::cos(beam.azimuth), std::sin(beam.azimuth)};
    const Eigen::Vector2d end = origin + (beam.hit ? beam.range : scan.max_range) * dir;
    if (beam.hit) {
      const Eigen::Vector2i end_cell = geometry.world_to_cell(end);
      march_cells(geometry, origin, end, [&](int e, int n) {
        if (e == end_cell.x() && n == end_cell.y()) return true;  // handled below
        deposit(e, n, free_mass);
        return true;
      });
      if (geometry.contains_cell(end_cell.x(), end_cell.y()))
        deposit(end_cell.x(), end_cell.y(), hit_mass);
    } else {
      march_cells(geometry, origin, end, [&](int e, int n) {
        deposit(e, n, free_mass);
        return true;
      });
    }
  }
  GridFrame frame = GridFrame::zeros(geometry, 2);
  frame.timestamp = scan.timestamp;
  frame.ego_pose = ego_pose;
  frame.channels[kMeasOcc] = occ.cast<float>();
  frame.channels[kMeasFree] = fre.cast<float>();
  return frame;
}

GroundTruth ground_truth(const ScenarioSpec& scenario, double t) {
  scenario.validate();
  require(t >= 0.0 && t <= scenario.duration, "ground_truth: t outside scenario duration");
  const Pose2 ego = scenario.ego_pose_at(t);
  const GridGeometry& g = scenario.geometry;

  GroundTruth gt;
  gt.timestamp = t;
  for (size_t i = 0; i < scenario.objects.size(); ++i) {
    const ObjectSpec& obj = scenario.objects[i];
    const Pose2 p = obj.pose_at(t);
    GroundTruthBox b;
    b.box = ObjectBox::make(p.position(), obj.width, obj.length, p.heading);
    b.speed = obj.speed_at(t);
    b.dynamic = obj.kind == ObjectKind::kDynamic && b.speed > kStaticSpeedThreshold;
    b.object_index = static_cast<int>(i);
    gt.boxes.push_back(b);
  }

  gt.mask = MaskPlane::Constant(g.height_cells, g.width_cells,
                                static_cast<std::uint8_t>(CellLabel::kFree));
  const double band = 1.5 * g.cell_size;  // visible surface depth
  const Eigen::Vector2d origin = ego.position();
  for (int n = 0; n < g.height_cells; ++n) {
    for (int e = 0; e < g.width_cells; ++e) {
      const Eigen::Vector2d cc = g.cell_center(e, n);
      const Eigen::Vector2d rel = cc - origin;
      const double dist = rel.norm();

      bool visible = dist <= scenario.sensor.max_range;
      if (visible && scenario.sensor.angular_span < kTwoPi - 1e-12 && dist > 1e-12) {
        const double ang = wrap_angle(std::atan2(rel.y(), rel.x()) - ego.heading);
        visible = std::abs(ang) <= 0.5 * scenario.sensor.angular_span;
      }
      if (visible && dist > 1e-12) {
        const Eigen::Vector2d dir = rel / dist;
        for (const GroundTruthBox& b : gt.boxes) {
          if (const auto hit = ray_box_intersection(origin, dir, b.box)) {
            if (*hit < dist - band) {
              visible = false;
              break;
            }
          }
        }
      }

      bool covered = false, dynamic = false;
      for (const GroundTruthBox& b : gt.boxes) {
        if (b.box.contains(cc)) {
          covered = true;
          dynamic = dynamic || b.dynamic;
        }
      }

      CellLabel label;
      if (!visible)
        label = CellLabel::kUnobservable;
      else if (covered)
        label = dynamic ? CellLabel::kDynamic : CellLabel::kStatic;
      else
        label = CellLabel::kFree;
      gt.mask(n, e) = static_cast<std::uint8_t>(label);
    }
  }
  return gt;
}

std::vector<GridFrame> simulate_measurement_sequence(const ScenarioSpec& scenario,
                                                     const InverseSensorModel& model) {
  scenario.validate();
  std::vector<GridFrame> frames;
  const int count = scenario.frame_count();
  frames.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double t = scenario.frame_time(i);
    const LidarScan scan = simulate_scan(scenario, t);
    frames.push_back(scan_to_measurement_grid(scan, scenario.geometry,
                                              scenario.ego_pose_at(t), model));
  }
  return frames;
}

}  // namespace dogm
