#pragma once

#include <vector>

#include "dogm/dempster.hpp"
#include "dogm/geometry.hpp"

namespace dogm {

// Fixed channel order of the 7-channel dynamic occupancy grid map, also the
// serialization order.
enum DogmaChannel : int {
  kMassOcc = 0,
  kMassFree = 1,
  kVelEast = 2,
  kVelNorth = 3,
  kVarVelEast = 4,
  kVarVelNorth = 5,
  kCovVel = 6,
};
inline constexpr int kDogmaChannels = 7;

// Channel indices of a 2-channel measurement grid (single-scan evidence).
inline constexpr int kMeasOcc = 0;
inline constexpr int kMeasFree = 1;

/// One cell of the dynamic occupancy grid map: occupancy masses plus the
/// first two moments of the filtered velocity estimate.
struct DogmaCell {
  float m_occ = 0.0f;
  float m_free = 0.0f;
  float v_east = 0.0f;
  float v_north = 0.0f;
  float var_v_east = 0.0f;
  float var_v_north = 0.0f;
  float cov_v = 0.0f;

  Mass mass() const { return Mass{m_occ, m_free}; }

  bool valid(double tol = 1e-6) const {
    return mass().valid(tol) && var_v_east >= -tol && var_v_north >= -tol &&
           static_cast<double>(cov_v) * cov_v <=
               static_cast<double>(var_v_east) * var_v_north + tol;
  }
};

inline double occupancy_probability(const DogmaCell& c) {
  return 0.5 * c.m_occ + 0.5 * (1.0 - c.m_free);
}

/// One time step of a grid sequence: geometry, ego pose and a stack of
/// per-cell channel planes. Immutable by convention once filled; all
/// accessors are const and nothing here mutates shared state.
struct GridFrame {
  GridGeometry geometry;
  double timestamp = 0.0;
  Pose2 ego_pose{};
  std::vector<GridPlane> channels;

  int channel_count() const { return static_cast<int>(channels.size()); }

  static GridFrame zeros(const GridGeometry& g, int channel_count) {
    require(g.valid(), "GridFrame: invalid geometry");
    GridFrame f;
    f.geometry = g;
    f.channels.assign(static_cast<size_t>(channel_count),
                      GridPlane::Zero(g.height_cells, g.width_cells));
    return f;
  }

  DogmaCell dogma_cell(int e, int n) const {
    return DogmaCell{channels[kMassOcc](n, e),     channels[kMassFree](n, e),
                     channels[kVelEast](n, e),     channels[kVelNorth](n, e),
                     channels[kVarVelEast](n, e),  channels[kVarVelNorth](n, e),
                     channels[kCovVel](n, e)};
  }
};

/// P_O over a whole frame, 0.5 * M_O + 0.5 * (1 - M_F).
inline GridPlane occupancy_probability(const GridFrame& f) {
  return 0.5f * f.channels[kMassOcc] + 0.5f * (1.0f - f.channels[kMassFree]);
}

/// Checks the DogmaCell invariants over every cell of a 7-channel frame.
inline bool dogma_frame_valid(const GridFrame& f, double tol = 1e-6) {
  if (f.channel_count() != kDogmaChannels) return false;
  for (int n = 0; n < f.geometry.height_cells; ++n)
    for (int e = 0; e < f.geometry.width_cells; ++e)
      if (!f.dogma_cell(e, n).valid(tol)) return false;
  return true;
}

}  // namespace dogm
