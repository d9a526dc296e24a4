#include "dogm/filter.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dogm {
namespace {

// Evidence likelihood of a particle sitting in a cell with the given
// single-scan measurement masses. Occupied evidence feeds lineages, free
// evidence starves them, unknown lets particles coast through occlusion.
double measurement_likelihood(double m_occ, double m_free) {
  const double unknown = std::max(0.0, 1.0 - m_occ - m_free);
  return 1.0 * m_occ + 0.08 * m_free + 0.35 * unknown;
}

constexpr double kOccupiedBudgetMass = 0.2;  // cells below this get no budget
constexpr double kNewbornWeightScale = 0.05; // newborns must not drown survivors
constexpr double kStaticBirthFraction = 0.5;
constexpr double kInheritBirthFraction = 0.6;  // births continuing locally tracked motion
constexpr double kNoveltyGain = 0.9;
constexpr double kCullWeightRatio = 1e-4;    // relative to the mean weight

}  // namespace

VelocityStats velocity_stats(std::span<const Particle> particles) {
  VelocityStats s;
  for (const Particle& p : particles) {
    s.total_weight += p.weight;
    s.v_east += p.weight * p.velocity.x();
    s.v_north += p.weight * p.velocity.y();
  }
  if (s.total_weight <= 0.0) return VelocityStats{};
  s.v_east /= s.total_weight;
  s.v_north /= s.total_weight;
  for (const Particle& p : particles) {
    const double de = p.velocity.x() - s.v_east;
    const double dn = p.velocity.y() - s.v_north;
    s.var_v_east += p.weight * de * de;
    s.var_v_north += p.weight * dn * dn;
    s.cov_v += p.weight * de * dn;
  }
  s.var_v_east /= s.total_weight;
  s.var_v_north /= s.total_weight;
  s.cov_v /= s.total_weight;
  return s;
}

DogmaFilter::DogmaFilter(const GridGeometry& geometry, const FilterConfig& config)
    : geometry_(geometry),
      config_(config),
      mass_occ_(Plane<double>::Zero(geometry.height_cells, geometry.width_cells)),
      mass_free_(Plane<double>::Zero(geometry.height_cells, geometry.width_cells)),
      rng_(derive_seed(config.rng_seed, 0x0d0, 0x0f1)) {
  require(geometry_.valid(), "filter: invalid geometry");
  config_.validate();
}

void DogmaFilter::predict(double dt) {
  mass_occ_ *= config_.persistence_prob;
  mass_free_ *= config_.persistence_prob;

  const Eigen::Vector2d lo = geometry_.origin + Eigen::Vector2d::Constant(1e-6);
  const Eigen::Vector2d hi = geometry_.origin + geometry_.extent() - Eigen::Vector2d::Constant(1e-6);
  for (Particle& p : particles_) {
    p.position += dt * p.velocity;
    if (config_.process_noise_pos > 0.0) {
      p.position.x() += rng_.gaussian(0.0, config_.process_noise_pos);
      p.position.y() += rng_.gaussian(0.0, config_.process_noise_pos);
    }
    if (config_.process_noise_vel > 0.0) {
      p.velocity.x() += rng_.gaussian(0.0, config_.process_noise_vel);
      p.velocity.y() += rng_.gaussian(0.0, config_.process_noise_vel);
    }
    p.position = p.position.cwiseMax(lo).cwiseMin(hi);
  }
}

namespace {

// Bilinear sample of a plane at fractional cell coordinates; grid-edge
// clamped. Smooths the cell quantization of the evidence so particles a
// fraction of a cell off a measured surface still feel it.
double sample_plane(const GridPlane& plane, const Eigen::Vector2d& grid_pos) {
  const double x = grid_pos.x() - 0.5;
  const double y = grid_pos.y() - 0.5;
  const int e0 = std::clamp(static_cast<int>(std::floor(x)), 0, static_cast<int>(plane.cols()) - 1);
  const int n0 = std::clamp(static_cast<int>(std::floor(y)), 0, static_cast<int>(plane.rows()) - 1);
  const int e1 = std::min(e0 + 1, static_cast<int>(plane.cols()) - 1);
  const int n1 = std::min(n0 + 1, static_cast<int>(plane.rows()) - 1);
  const double fe = std::clamp(x - e0, 0.0, 1.0);
  const double fn = std::clamp(y - n0, 0.0, 1.0);
  return (1.0 - fn) * ((1.0 - fe) * plane(n0, e0) + fe * plane(n0, e1)) +
         fn * ((1.0 - fe) * plane(n1, e0) + fe * plane(n1, e1));
}

}  // namespace

void DogmaFilter::update_weights(const GridFrame& measurement) {
  const GridPlane& occ = measurement.channels[kMeasOcc];
  const GridPlane& fre = measurement.channels[kMeasFree];
  for (Particle& p : particles_) {
    const Eigen::Vector2d g = geometry_.world_to_grid(p.position);
    const Eigen::Vector2i c = geometry_.world_to_cell(p.position);
    const double mo = sample_plane(occ, g);
    const double mf = sample_plane(fre, g);
    double likelihood = measurement_likelihood(mo, mf);
    // Newly occupied cells carry the motion information: particles that
    // predicted an occupancy front get amplified every frame, which is what
    // pulls cell velocities onto a moving object within a few passes.
    const double novelty = mo * std::clamp(1.0 - mass_occ_(c.y(), c.x()) / 0.5, 0.0, 1.0);
    likelihood += kNoveltyGain * novelty;
    p.weight *= likelihood;
  }
}

void DogmaFilter::fuse_masses(const GridFrame& measurement) {
  const GridPlane& mo = measurement.channels[kMeasOcc];
  const GridPlane& mf = measurement.channels[kMeasFree];
  for (int n = 0; n < geometry_.height_cells; ++n) {
    for (int e = 0; e < geometry_.width_cells; ++e) {
      const double bo = mo(n, e);
      const double bf = mf(n, e);
      if (bo == 0.0 && bf == 0.0) continue;
      const double ao = mass_occ_(n, e);
      const double af = mass_free_(n, e);
      const double k = ao * bf + af * bo;
      if (k >= 1.0 - 1e-12) continue;  // discard fully conflicting evidence
      const double au = 1.0 - ao - af;
      const double bu = 1.0 - bo - bf;
      const double inv = 1.0 / (1.0 - k);
      mass_occ_(n, e) = (ao * bo + ao * bu + au * bo) * inv;
      mass_free_(n, e) = (af * bf + af * bu + au * bf) * inv;
    }
  }
}

void DogmaFilter::resample_and_birth(const GridFrame& measurement) {
  const int cells = geometry_.width_cells * geometry_.height_cells;
  const int cap = 2 * config_.particles_per_occupied_cell;

  // Bucket particle indices by cell, keeping insertion order inside a cell.
  std::vector<std::pair<int, int>> order(particles_.size());
  for (size_t i = 0; i < particles_.size(); ++i) {
    const Eigen::Vector2i c = geometry_.world_to_cell(particles_[i].position);
    order[i] = {c.y() * geometry_.width_cells + c.x(), static_cast<int>(i)};
  }
  std::sort(order.begin(), order.end());

  const GridPlane& meas_occ = measurement.channels[kMeasOcc];
  std::vector<Particle> next;
  next.reserve(particles_.size() + 256);

  double global_mean_weight = 1.0;
  if (!particles_.empty()) {
    double total = 0.0;
    for (const Particle& p : particles_) total += p.weight;
    global_mean_weight = total / static_cast<double>(particles_.size());
  }

  // Per-cell ranges into `order` for neighborhood lookups during births.
  std::vector<int> cell_begin(static_cast<size_t>(cells) + 1, 0);
  for (const auto& [cell, idx] : order) ++cell_begin[static_cast<size_t>(cell) + 1];
  for (int c = 0; c < cells; ++c) cell_begin[c + 1] += cell_begin[c];

  // Weighted draw of a velocity from the pre-step population around a cell;
  // newborns continuing an already-tracked surface inherit its motion.
  auto neighborhood_velocity = [&](int e, int n, Eigen::Vector2d& out) {
    double total = 0.0;
    for (int dn = -1; dn <= 1; ++dn) {
      for (int de = -1; de <= 1; ++de) {
        const int ee = e + de, nn = n + dn;
        if (ee < 0 || ee >= geometry_.width_cells || nn < 0 || nn >= geometry_.height_cells)
          continue;
        const int c = nn * geometry_.width_cells + ee;
        for (int i = cell_begin[c]; i < cell_begin[c + 1]; ++i)
          total += particles_[order[i].second].weight;
      }
    }
    if (total < 1e-3 * global_mean_weight) return false;
    const double pick = rng_.uniform() * total;
    double cum = 0.0;
    for (int dn = -1; dn <= 1; ++dn) {
      for (int de = -1; de <= 1; ++de) {
        const int ee = e + de, nn = n + dn;
        if (ee < 0 || ee >= geometry_.width_cells || nn < 0 || nn >= geometry_.height_cells)
          continue;
        const int c = nn * geometry_.width_cells + ee;
        for (int i = cell_begin[c]; i < cell_begin[c + 1]; ++i) {
          cum += particles_[order[i].second].weight;
          if (cum >= pick) {
            out = particles_[order[i].second].velocity;
            return true;
          }
        }
      }
    }
    return false;
  };

  double max_weight = 0.0;
  size_t cursor = 0;
  std::vector<Particle> bucket;
  for (int cell = 0; cell < cells; ++cell) {
    bucket.clear();
    while (cursor < order.size() && order[cursor].first == cell)
      bucket.push_back(particles_[order[cursor++].second]);

    const int e = cell % geometry_.width_cells;
    const int n = cell / geometry_.width_cells;
    const bool hit = meas_occ(n, e) > 0.0f;
    if (bucket.empty() && !hit) continue;

    // Down-sample overfull or degenerate populations (systematic resampling).
    const int count = static_cast<int>(bucket.size());
    if (count >= 4) {
      double total = 0.0, total_sq = 0.0;
      for (const Particle& p : bucket) {
        total += p.weight;
        total_sq += p.weight * p.weight;
      }
      const double ess = total_sq > 0.0 ? total * total / total_sq : 0.0;
      const int target = std::min(count, cap);
      if (count > cap || ess < 0.65 * count) {
        std::vector<Particle> resampled;
        resampled.reserve(target);
        const double u = rng_.uniform();
        double cumulative = bucket.front().weight;
        int src = 0;
        for (int i = 0; i < target; ++i) {
          const double pos = (i + u) / target * total;
          while (cumulative < pos && src + 1 < count) cumulative += bucket[++src].weight;
          Particle p = bucket[src];
          p.weight = total / target;
          resampled.push_back(p);
        }
        bucket.swap(resampled);
      }
    }

    // Births: newly occupied cells get a full seed, persistently occupied
    // cells are topped up by at most the birth fraction.
    if (hit) {
      const double fused = mass_occ_(n, e);
      const int budget = fused >= kOccupiedBudgetMass
                             ? static_cast<int>(std::ceil(config_.particles_per_occupied_cell * fused))
                             : 0;
      int births = budget - static_cast<int>(bucket.size());
      const bool newly_occupied = bucket.empty();
      if (!newly_occupied)
        births = std::min(births, static_cast<int>(std::ceil(
                                      config_.birth_fraction * config_.particles_per_occupied_cell)));
      if (births > 0) {
        double reference_weight = global_mean_weight;
        if (!bucket.empty()) {
          double total = 0.0;
          for (const Particle& p : bucket) total += p.weight;
          reference_weight = total / static_cast<double>(bucket.size());
        }
        const double birth_weight = kNewbornWeightScale * reference_weight;
        for (int i = 0; i < births; ++i) {
          Particle p;
          p.position = geometry_.origin +
                       geometry_.cell_size *
                           Eigen::Vector2d(e + rng_.uniform(), n + rng_.uniform());
          Eigen::Vector2d inherited;
          if (rng_.uniform() < kInheritBirthFraction && neighborhood_velocity(e, n, inherited)) {
            p.velocity = inherited + Eigen::Vector2d{rng_.gaussian(0.0, 0.3),
                                                     rng_.gaussian(0.0, 0.3)};
          } else if (rng_.uniform() < kStaticBirthFraction) {
            p.velocity.setZero();
          } else {
            p.velocity = {rng_.gaussian(0.0, config_.initial_speed_sigma),
                          rng_.gaussian(0.0, config_.initial_speed_sigma)};
          }
          p.weight = birth_weight;
          bucket.push_back(p);
        }
      }
    }

    for (const Particle& p : bucket) {
      max_weight = std::max(max_weight, p.weight);
      next.push_back(p);
    }
  }

  if (max_weight > 0.0 && !next.empty()) {
    double total = 0.0;
    for (const Particle& p : next) total += p.weight;
    const double cull = kCullWeightRatio * total / static_cast<double>(next.size());
    std::erase_if(next, [cull](const Particle& p) { return p.weight < cull; });
    const double inv = 1.0 / max_weight;
    for (Particle& p : next) p.weight *= inv;
  }
  particles_.swap(next);
}

GridFrame DogmaFilter::step(const GridFrame& measurement, double dt) {
  require(dt > 0.0, "filter: dt must be > 0");
  require(measurement.geometry == geometry_, "filter: measurement geometry mismatch");
  require(measurement.channel_count() >= 2, "filter: measurement needs occ/free channels");

  predict(dt);
  update_weights(measurement);
  fuse_masses(measurement);
  resample_and_birth(measurement);

  timestamp_ = measurement.timestamp;
  ego_pose_ = measurement.ego_pose;
  has_frame_ = true;
  return extract_dogma();
}

GridFrame DogmaFilter::extract_dogma() const {
  GridFrame f = GridFrame::zeros(geometry_, kDogmaChannels);
  f.timestamp = timestamp_;
  f.ego_pose = ego_pose_;
  f.channels[kMassOcc] = mass_occ_.cast<float>();
  f.channels[kMassFree] = mass_free_.cast<float>();

  std::vector<std::pair<int, int>> order(particles_.size());
  for (size_t i = 0; i < particles_.size(); ++i) {
    const Eigen::Vector2i c = geometry_.world_to_cell(particles_[i].position);
    order[i] = {c.y() * geometry_.width_cells + c.x(), static_cast<int>(i)};
  }
  std::sort(order.begin(), order.end());

  GridPlane& ve = f.channels[kVelEast];
  GridPlane& vn = f.channels[kVelNorth];
  GridPlane& vve = f.channels[kVarVelEast];
  GridPlane& vvn = f.channels[kVarVelNorth];
  GridPlane& cv = f.channels[kCovVel];
  vve.setConstant(static_cast<float>(config_.prior_velocity_variance));
  vvn.setConstant(static_cast<float>(config_.prior_velocity_variance));

  std::vector<Particle> bucket;
  size_t cursor = 0;
  while (cursor < order.size()) {
    const int cell = order[cursor].first;
    bucket.clear();
    while (cursor < order.size() && order[cursor].first == cell)
      bucket.push_back(particles_[order[cursor++].second]);
    const int e = cell % geometry_.width_cells;
    const int n = cell / geometry_.width_cells;
    VelocityStats s = velocity_stats(bucket);
    s.var_v_east = std::max(s.var_v_east, config_.variance_floor);
    s.var_v_north = std::max(s.var_v_north, config_.variance_floor);
    const double cov_bound = std::sqrt(s.var_v_east * s.var_v_north);
    s.cov_v = std::clamp(s.cov_v, -cov_bound, cov_bound);
    ve(n, e) = static_cast<float>(s.v_east);
    vn(n, e) = static_cast<float>(s.v_north);
    vve(n, e) = static_cast<float>(s.var_v_east);
    vvn(n, e) = static_cast<float>(s.var_v_north);
    cv(n, e) = static_cast<float>(s.cov_v);
  }
  return f;
}

std::vector<GridFrame> run_filter(const std::vector<GridFrame>& measurements,
                                  const FilterConfig& config) {
  require(!measurements.empty(), "run_filter: empty measurement sequence");
  DogmaFilter filter(measurements.front().geometry, config);
  std::vector<GridFrame> out;
  out.reserve(measurements.size());
  double prev_t = measurements.front().timestamp - 1.0;
  for (const GridFrame& m : measurements) {
    const double dt = m.timestamp - prev_t;
    prev_t = m.timestamp;
    out.push_back(filter.step(m, dt > 0.0 ? dt : 0.1));
    // first-step dt is nominal; the filter state is empty at that point
  }
  return out;
}

}  // namespace dogm
