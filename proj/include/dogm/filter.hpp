#pragma once

#include <span>
#include <vector>

#include "dogm/grid.hpp"
#include "dogm/rng.hpp"

namespace dogm {

struct Particle {
  Eigen::Vector2d position{0.0, 0.0};
  Eigen::Vector2d velocity{0.0, 0.0};
  double weight = 1.0;
};

struct FilterConfig {
  int particles_per_occupied_cell = 64;
  double birth_fraction = 0.25;      // share of a cell's budget reseeded per step
  double persistence_prob = 0.9;     // per-step survival of accumulated evidence
  double process_noise_pos = 0.03;   // m per step
  double process_noise_vel = 0.15;   // m/s per step
  double initial_speed_sigma = 4.0;  // newborn velocity prior, m/s per axis
  double prior_velocity_variance = 16.0;  // reported for cells without particles, (m/s)^2
  double variance_floor = 1e-4;           // (m/s)^2
  std::uint64_t rng_seed = 1;

  void validate() const {
    require(particles_per_occupied_cell >= 1, "filter: particle count must be >= 1");
    require(birth_fraction >= 0.0 && birth_fraction <= 1.0, "filter: birth_fraction in [0,1]");
    require(persistence_prob >= 0.0 && persistence_prob <= 1.0,
            "filter: persistence_prob in [0,1]");
    require(process_noise_pos >= 0.0 && process_noise_vel >= 0.0 &&
                initial_speed_sigma >= 0.0,
            "filter: noise sigmas must be >= 0");
  }
};

/// Weighted first and second velocity moments of a particle population.
struct VelocityStats {
  double v_east = 0.0;
  double v_north = 0.0;
  double var_v_east = 0.0;
  double var_v_north = 0.0;
  double cov_v = 0.0;
  double total_weight = 0.0;
};

VelocityStats velocity_stats(std::span<const Particle> particles);

/// Per-cell particle filter over a measurement-grid sequence. Particles carry
/// occupancy evidence with a constant-velocity motion model; cell masses fuse
/// predicted state with measurements through Dempster's rule. step() mutates
/// the filter, so a filter instance takes exactly one writer at a time.
class DogmaFilter {
 public:
  DogmaFilter(const GridGeometry& geometry, const FilterConfig& config);

  /// Advances the filter by one measurement frame (channels kMeasOcc /
  /// kMeasFree) and returns the fused 7-channel DOGMa frame.
  GridFrame step(const GridFrame& measurement, double dt);

  /// DOGMa frame for the current state without advancing time.
  GridFrame extract_dogma() const;

  const std::vector<Particle>& particles() const { return particles_; }
  const GridGeometry& geometry() const { return geometry_; }

 private:
  void predict(double dt);
  void update_weights(const GridFrame& measurement);
  void fuse_masses(const GridFrame& measurement);
  void resample_and_birth(const GridFrame& measurement);

  GridGeometry geometry_;
  FilterConfig config_;
  Plane<double> mass_occ_;
  Plane<double> mass_free_;
  std::vector<Particle> particles_;
  Rng rng_;
  double timestamp_ = 0.0;
  Pose2 ego_pose_{};
  bool has_frame_ = false;
};

/// Runs a fresh filter over a whole measurement sequence.
std::vector<GridFrame> run_filter(const std::vector<GridFrame>& measurements,
                                  const FilterConfig& config);

}  // namespace dogm
