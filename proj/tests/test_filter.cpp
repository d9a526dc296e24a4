#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dogm/filter.hpp"
#include "dogm/sim.hpp"
#include "test_util.hpp"

using namespace dogm;

namespace {

GridGeometry centered_grid(int cells, double cell_size = 0.15) {
  GridGeometry g;
  g.width_cells = cells;
  g.height_cells = cells;
  g.cell_size = cell_size;
  g.origin = {-0.5 * cells * cell_size, -0.5 * cells * cell_size};
  return g;
}

ScenarioSpec wall_scenario(std::uint64_t seed) {
  ScenarioSpec s;
  s.duration = 3.0;
  s.frame_rate = 10.0;
  s.geometry = centered_grid(201);
  s.ego = {Waypoint{0.0, 0.0, 0.0, 0.0}};
  s.sensor.beam_count = 540;
  s.sensor.max_range = 14.0;
  s.rng_seed = seed;
  ObjectSpec wall;
  wall.kind = ObjectKind::kStatic;
  wall.width = 0.5;
  wall.length = 8.0;
  wall.trajectory = {Waypoint{0.0, 5.0, 0.0, kPi / 2}};
  s.objects = {wall};
  return s;
}

// A mover receding from the ego at 5 m/s: the visible face is perpendicular
// to the motion, so per-cell estimates carry the full velocity. A broadside
// view would only show a face sliding along itself, which carries no
// per-cell motion information under the cell-independence assumption.
ScenarioSpec moving_scenario(std::uint64_t seed) {
  ScenarioSpec s;
  s.duration = 3.0;
  s.frame_rate = 10.0;
  s.geometry = centered_grid(301);
  s.ego = {Waypoint{0.0, 0.0, 0.0, 0.0}};
  s.sensor.beam_count = 720;
  s.sensor.max_range = 25.0;
  s.rng_seed = seed;
  ObjectSpec car;
  car.kind = ObjectKind::kDynamic;
  car.width = 2.0;
  car.length = 4.5;
  car.trajectory = {Waypoint{0.0, 3.0, 0.0, 0.0}, Waypoint{3.0, 18.0, 0.0, 0.0}};
  s.objects = {car};
  return s;
}

/// Mean v_east over the observed surface band of the true box (interior
/// across the motion axis; occupancy border rows excluded the same way the
/// occlusion tests exclude region borders).
double band_mean_v_east(const ScenarioSpec& s, const GridFrame& frame, const ObjectBox& truth) {
  ObjectBox band = truth;
  band.width -= 0.3;
  band.length += 0.3;
  double v_sum = 0.0;
  int cells = 0;
  for (int n = 0; n < s.geometry.height_cells; ++n) {
    for (int e = 0; e < s.geometry.width_cells; ++e) {
      if (!band.contains(s.geometry.cell_center(e, n))) continue;
      if (frame.channels[kMassOcc](n, e) <= 0.55f) continue;
      v_sum += frame.channels[kVelEast](n, e);
      ++cells;
    }
  }
  return cells > 0 ? v_sum / cells : 0.0;
}

bool frames_bit_identical(const GridFrame& a, const GridFrame& b) {
  if (a.channel_count() != b.channel_count()) return false;
  for (int c = 0; c < a.channel_count(); ++c)
    if (std::memcmp(a.channels[c].data(), b.channels[c].data(),
                    sizeof(float) * a.channels[c].size()) != 0)
      return false;
  return true;
}

}  // namespace

TEST_CASE("velocity statistics: hand-computed weighted moments") {
  std::vector<Particle> ps(2);
  ps[0].velocity = {1.0, 0.0};
  ps[0].weight = 1.0;
  ps[1].velocity = {3.0, 0.0};
  ps[1].weight = 1.0;
  const VelocityStats s = velocity_stats(ps);
  CHECK(s.v_east == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(s.v_north == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(s.var_v_east == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(s.var_v_north == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(s.cov_v == doctest::Approx(0.0).epsilon(1e-15));

  // weighting shifts the mean toward the heavy particle
  ps[1].weight = 3.0;
  const VelocityStats w = velocity_stats(ps);
  CHECK(w.v_east == doctest::Approx(2.5).epsilon(1e-15));

  const VelocityStats empty = velocity_stats(std::span<const Particle>{});
  CHECK(empty.total_weight == 0.0);
}

TEST_CASE("empty cells report the configured prior variance") {
  FilterConfig cfg;
  DogmaFilter filter(centered_grid(11), cfg);
  const GridFrame f = filter.extract_dogma();
  CHECK(f.channels[kVarVelEast](5, 5) == doctest::Approx(cfg.prior_velocity_variance));
  CHECK(f.channels[kVarVelNorth](5, 5) == doctest::Approx(cfg.prior_velocity_variance));
  CHECK(f.channels[kVelEast](5, 5) == 0.0f);
  CHECK(f.channels[kCovVel](5, 5) == 0.0f);
}

TEST_CASE("a single particle's variance is floored, not zero") {
  FilterConfig cfg;
  cfg.particles_per_occupied_cell = 1;  // one newborn in the hit cell
  const GridGeometry g = centered_grid(11);
  DogmaFilter filter(g, cfg);
  GridFrame meas = GridFrame::zeros(g, 2);
  meas.timestamp = 0.1;
  meas.channels[kMeasOcc](8, 8) = 0.75f;
  const GridFrame f = filter.step(meas, 0.1);
  CHECK(f.channels[kVarVelEast](8, 8) == doctest::Approx(cfg.variance_floor));
  CHECK(f.channels[kVarVelNorth](8, 8) == doctest::Approx(cfg.variance_floor));
}

TEST_CASE("emitted frames satisfy the cell invariants") {
  ScenarioSpec s = moving_scenario(5);
  s.duration = 1.5;
  const auto measurements = simulate_measurement_sequence(s);
  FilterConfig cfg;
  cfg.rng_seed = 5;
  const auto frames = run_filter(measurements, cfg);
  for (size_t i = 0; i < frames.size(); i += 5) CHECK(dogma_frame_valid(frames[i]));
}

TEST_CASE("filter output is deterministic under a fixed seed") {
  ScenarioSpec s = moving_scenario(9);
  s.duration = 1.0;
  const auto measurements = simulate_measurement_sequence(s);
  FilterConfig cfg;
  cfg.rng_seed = 77;
  const auto a = run_filter(measurements, cfg);
  const auto b = run_filter(measurements, cfg);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) CHECK(frames_bit_identical(a[i], b[i]));
}

TEST_CASE("zero evidence forever decays all cells toward unknown") {
  const GridGeometry g = centered_grid(21);
  FilterConfig cfg;
  DogmaFilter filter(g, cfg);
  // charge one cell first
  GridFrame meas = GridFrame::zeros(g, 2);
  meas.timestamp = 0.1;
  meas.channels[kMeasOcc](10, 14) = 0.75f;
  meas.channels[kMeasFree](10, 4) = 0.6f;
  filter.step(meas, 0.1);

  GridFrame empty = GridFrame::zeros(g, 2);
  GridFrame last;
  for (int i = 0; i < 60; ++i) {
    empty.timestamp = 0.2 + 0.1 * i;
    last = filter.step(empty, 0.1);
  }
  CHECK(last.channels[kMassOcc].maxCoeff() < 0.05f);
  CHECK(last.channels[kMassFree].maxCoeff() < 0.05f);
}

TEST_CASE("static wall converges to high occupancy and low speed") {
  double worst_speed = 0.0;
  for (const std::uint64_t seed : {201ull, 202ull}) {
    ScenarioSpec s = wall_scenario(seed);
    const auto measurements = simulate_measurement_sequence(s);
    FilterConfig cfg;
    cfg.rng_seed = seed * 13;
    const auto frames = run_filter(measurements, cfg);
    const GroundTruth gt = ground_truth(s, s.frame_time(29));
    const GridFrame& f = frames[29];

    // converged face cells: static per ground truth and solidly occupied
    int face_cells = 0;
    double speed_sum = 0.0;
    for (int n = 0; n < s.geometry.height_cells; ++n) {
      for (int e = 0; e < s.geometry.width_cells; ++e) {
        if (gt.mask(n, e) != static_cast<std::uint8_t>(CellLabel::kStatic)) continue;
        if (f.channels[kMassOcc](n, e) <= 0.9f) continue;
        ++face_cells;
        speed_sum += std::hypot(f.channels[kVelEast](n, e), f.channels[kVelNorth](n, e));
      }
    }
    // the 8 m face spans ~53 cells; grazing edge cells stay uncertain
    REQUIRE(face_cells > 45);
    const double mean_speed = speed_sum / face_cells;
    worst_speed = std::max(worst_speed, mean_speed);
    CHECK(mean_speed < 0.5);
  }
  MESSAGE("wall mean speed worst case: ", worst_speed);
}

TEST_CASE("translating object's velocity estimate converges to the truth") {
  double mean_over_seeds = 0.0;
  const std::vector<std::uint64_t> seeds{301, 302};
  for (const std::uint64_t seed : seeds) {
    ScenarioSpec s = moving_scenario(seed);
    const auto measurements = simulate_measurement_sequence(s);
    FilterConfig cfg;
    cfg.rng_seed = seed * 7;
    const auto frames = run_filter(measurements, cfg);

    const int t = 29;
    const GroundTruth gt = ground_truth(s, s.frame_time(t));
    REQUIRE(gt.boxes.size() == 1);
    mean_over_seeds +=
        band_mean_v_east(s, frames[t], gt.boxes[0].box) / static_cast<double>(seeds.size());
  }
  MESSAGE("moving object mean v_east: ", mean_over_seeds);
  CHECK(mean_over_seeds > 4.0);
  CHECK(mean_over_seeds < 6.0);
}
