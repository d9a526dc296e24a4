#include "dogm/scenario.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace dogm {
namespace {

using nlohmann::json;

Pose2 interpolate(const std::vector<Waypoint>& wps, double t) {
  require(!wps.empty(), "trajectory must have at least one waypoint");
  if (wps.size() == 1 || t <= wps.front().time)
    return Pose2{wps.front().east, wps.front().north, wps.front().heading};
  if (t >= wps.back().time)
    return Pose2{wps.back().east, wps.back().north, wps.back().heading};
  size_t hi = 1;
  while (wps[hi].time < t) ++hi;
  const Waypoint& a = wps[hi - 1];
  const Waypoint& b = wps[hi];
  const double u = (t - a.time) / (b.time - a.time);
  Pose2 p;
  p.east = a.east + u * (b.east - a.east);
  p.north = a.north + u * (b.north - a.north);
  p.heading = a.heading + u * wrap_angle(b.heading - a.heading);
  return p;
}

}  // namespace

Pose2 ObjectSpec::pose_at(double t) const { return interpolate(trajectory, t); }

double ObjectSpec::speed_at(double t) const {
  if (trajectory.size() < 2) return 0.0;
  const double h = 1e-3;
  const double lo = std::max(trajectory.front().time, t - h);
  const double hi = std::min(trajectory.back().time, t + h);
  if (hi <= lo) return 0.0;
  const Pose2 a = pose_at(lo);
  const Pose2 b = pose_at(hi);
  return (b.position() - a.position()).norm() / (hi - lo);
}

Pose2 ScenarioSpec::ego_pose_at(double t) const { return interpolate(ego, t); }

void ScenarioSpec::validate() const {
  require(duration > 0.0, "scenario: duration must be > 0");
  require(frame_rate > 0.0, "scenario: frame_rate must be > 0");
  require(geometry.valid(), "scenario: invalid grid geometry");
  require(!ego.empty(), "scenario: ego pose missing");
  require(sensor.beam_count >= 1, "scenario: beam_count must be >= 1");
  require(sensor.max_range > 0.0, "scenario: max_range must be > 0");
  require(sensor.range_noise_sigma >= 0.0, "scenario: range noise sigma must be >= 0");
  require(sensor.dropout_prob >= 0.0 && sensor.dropout_prob < 1.0,
          "scenario: dropout_prob must be in [0, 1)");
  require(sensor.angular_span > 0.0 && sensor.angular_span <= kTwoPi + 1e-12,
          "scenario: angular_span must be in (0, 2*pi]");
  for (const ObjectSpec& o : objects) {
    require(o.width > 0.0 && o.length > 0.0, "scenario: object width/length must be > 0");
    require(!o.trajectory.empty(), "scenario: object trajectory missing");
    for (size_t i = 1; i < o.trajectory.size(); ++i)
      require(o.trajectory[i].time > o.trajectory[i - 1].time,
              "scenario: waypoint times must strictly increase");
  }
  for (size_t i = 1; i < ego.size(); ++i)
    require(ego[i].time > ego[i - 1].time, "scenario: ego waypoint times must strictly increase");
}

namespace {

std::vector<Waypoint> waypoints_from_json(const json& j) {
  std::vector<Waypoint> out;
  for (const auto& row : j) {
    require(row.is_array() && row.size() == 4, "scenario: waypoint must be [t, east, north, heading]");
    out.push_back(Waypoint{row[0].get<double>(), row[1].get<double>(), row[2].get<double>(),
                           row[3].get<double>()});
  }
  return out;
}

json waypoints_to_json(const std::vector<Waypoint>& wps) {
  json j = json::array();
  for (const Waypoint& w : wps) j.push_back({w.time, w.east, w.north, w.heading});
  return j;
}

}  // namespace

ScenarioSpec parse_scenario(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("scenario: invalid JSON: ") + e.what());
  }
  ScenarioSpec s;
  try {
    s.duration = j.at("duration").get<double>();
    s.frame_rate = j.at("frame_rate").get<double>();
    s.rng_seed = j.value("rng_seed", std::uint64_t{1});

    const json& g = j.at("grid");
    s.geometry.width_cells = g.at("width_cells").get<int>();
    s.geometry.height_cells = g.at("height_cells").get<int>();
    s.geometry.cell_size = g.value("cell_size", 0.15);
    s.geometry.origin = {g.value("origin_east", 0.0), g.value("origin_north", 0.0)};

    const json& e = j.at("ego");
    if (e.contains("trajectory")) {
      s.ego = waypoints_from_json(e.at("trajectory"));
    } else {
      s.ego = {Waypoint{0.0, e.value("east", 0.0), e.value("north", 0.0), e.value("heading", 0.0)}};
    }

    if (j.contains("sensor")) {
      const json& n = j.at("sensor");
      s.sensor.beam_count = n.value("beam_count", s.sensor.beam_count);
      s.sensor.angular_span = n.value("angular_span", s.sensor.angular_span);
      s.sensor.max_range = n.value("max_range", s.sensor.max_range);
      s.sensor.range_noise_sigma = n.value("range_noise_sigma", s.sensor.range_noise_sigma);
      s.sensor.dropout_prob = n.value("dropout_prob", s.sensor.dropout_prob);
    }

    for (const json& o : j.at("objects")) {
      ObjectSpec obj;
      obj.width = o.at("width").get<double>();
      obj.length = o.at("length").get<double>();
      const std::string kind = o.value("kind", "static");
      require(kind == "static" || kind == "dynamic", "scenario: object kind must be static|dynamic");
      obj.kind = kind == "dynamic" ? ObjectKind::kDynamic : ObjectKind::kStatic;
      if (o.contains("trajectory")) {
        obj.trajectory = waypoints_from_json(o.at("trajectory"));
      } else {
        const json& p = o.at("pose");
        obj.trajectory = {Waypoint{0.0, p.value("east", 0.0), p.value("north", 0.0),
                                   p.value("heading", 0.0)}};
      }
      s.objects.push_back(std::move(obj));
    }
  } catch (const json::exception& e2) {
    throw std::invalid_argument(std::string("scenario: missing or malformed field: ") + e2.what());
  }
  s.validate();
  return s;
}

ScenarioSpec load_scenario(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("scenario: cannot open " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  ScenarioSpec s = parse_scenario(ss.str());
  // a world without a single object or wall is a config mistake at file level
  require(!s.objects.empty(), "scenario: at least one object or wall required");
  return s;
}

void save_scenario(const ScenarioSpec& s, const std::filesystem::path& path) {
  json j;
  j["duration"] = s.duration;
  j["frame_rate"] = s.frame_rate;
  j["rng_seed"] = s.rng_seed;
  j["grid"] = {{"width_cells", s.geometry.width_cells},
               {"height_cells", s.geometry.height_cells},
               {"cell_size", s.geometry.cell_size},
               {"origin_east", s.geometry.origin.x()},
               {"origin_north", s.geometry.origin.y()}};
  j["ego"] = {{"trajectory", waypoints_to_json(s.ego)}};
  j["sensor"] = {{"beam_count", s.sensor.beam_count},
                 {"angular_span", s.sensor.angular_span},
                 {"max_range", s.sensor.max_range},
                 {"range_noise_sigma", s.sensor.range_noise_sigma},
                 {"dropout_prob", s.sensor.dropout_prob}};
  j["objects"] = json::array();
  for (const ObjectSpec& o : s.objects) {
    json jo = {{"width", o.width},
               {"length", o.length},
               {"kind", o.kind == ObjectKind::kDynamic ? "dynamic" : "static"},
               {"trajectory", waypoints_to_json(o.trajectory)}};
    j["objects"].push_back(std::move(jo));
  }
  std::ofstream os(path);
  if (!os) throw std::runtime_error("scenario: cannot write " + path.string());
  os << j.dump(2) << "\n";
}

}  // namespace dogm
