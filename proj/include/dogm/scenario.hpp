#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dogm/geometry.hpp"

namespace dogm {

struct Waypoint {
  double time = 0.0;
  double east = 0.0;
  double north = 0.0;
  double heading = 0.0;
};

enum class ObjectKind { kStatic, kDynamic };

/// Rectangular scene object. The trajectory is piecewise-linear in position;
/// headings interpolate along the shortest angular arc. A single waypoint
/// means the object never moves.
struct ObjectSpec {
  double width = 0.0;
  double length = 0.0;
  ObjectKind kind = ObjectKind::kStatic;
  std::vector<Waypoint> trajectory;

  Pose2 pose_at(double t) const;
  /// Centroid speed at time t (one-sided at trajectory ends).
  double speed_at(double t) const;
};

struct SensorSpec {
  int beam_count = 720;
  double angular_span = kTwoPi;  // symmetric about the ego heading
  double max_range = 25.0;
  double range_noise_sigma = 0.0;
  double dropout_prob = 0.0;
};

struct ScenarioSpec {
  double duration = 1.0;
  double frame_rate = 10.0;
  GridGeometry geometry;
  std::vector<Waypoint> ego;  // single waypoint = standing ego
  std::vector<ObjectSpec> objects;
  SensorSpec sensor;
  std::uint64_t rng_seed = 1;

  Pose2 ego_pose_at(double t) const;
  int frame_count() const {
    return std::max(1, static_cast<int>(std::llround(duration * frame_rate)));
  }
  double frame_time(int index) const { return index / frame_rate; }

  /// Throws std::invalid_argument when any invariant is violated.
  void validate() const;
};

struct LidarBeam {
  double azimuth = 0.0;  // world angle, strictly increasing across a scan
  double range = 0.0;    // meaningful only when hit
  bool hit = false;
};

struct LidarScan {
  double timestamp = 0.0;
  double max_range = 0.0;  // sensor reach when the scan was taken
  std::vector<LidarBeam> beams;
};

/// Reads a scenario from its JSON file; schema documented in the README with
/// a complete example under scenarios/.
ScenarioSpec load_scenario(const std::filesystem::path& path);

/// Parses a scenario from JSON text (exposed for tests).
ScenarioSpec parse_scenario(const std::string& json_text);

void save_scenario(const ScenarioSpec& spec, const std::filesystem::path& path);

}  // namespace dogm
