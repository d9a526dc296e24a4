#pragma once

#include <stdexcept>

namespace dogm {

/// Dempster-Shafer belief masses over the frame {Occupied, Free}. The
/// unassigned remainder 1 - occ - free is the unknown mass.
struct Mass {
  double occ = 0.0;
  double free = 0.0;

  double unknown() const { return 1.0 - occ - free; }

  bool valid(double tol = 1e-9) const {
    return occ >= -tol && free >= -tol && occ + free <= 1.0 + tol;
  }
};

/// Point occupancy probability of a cell, 0.5 * m_occ + 0.5 * (1 - m_free).
inline double occupancy_probability(const Mass& m) {
  return 0.5 * m.occ + 0.5 * (1.0 - m.free);
}

struct TotalConflictError : std::domain_error {
  TotalConflictError() : std::domain_error("ds_combine: total conflict (k = 1)") {}
};

/// Dempster's rule of combination over {Occupied, Free}. The vacuous mass
/// (0, 0) is the identity. Throws TotalConflictError when the conflict
/// k = a.occ * b.free + a.free * b.occ reaches 1.
inline Mass ds_combine(const Mass& a, const Mass& b) {
  const double k = a.occ * b.free + a.free * b.occ;
  if (k >= 1.0) throw TotalConflictError();
  const double au = a.unknown();
  const double bu = b.unknown();
  const double inv = 1.0 / (1.0 - k);
  return Mass{(a.occ * b.occ + a.occ * bu + au * b.occ) * inv,
              (a.free * b.free + a.free * bu + au * b.free) * inv};
}

}  // namespace dogm
