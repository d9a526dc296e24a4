#pragma once

#include <vector>

#include "dogm/box.hpp"
#include "dogm/grid.hpp"

namespace dogm {

struct AutolabelConfig {
  // Rise/fall hysteresis on the occupancy probability series.
  double p_high = 0.7;
  double p_low = 0.4;
  int pre_window = 5;  // frames searched before a rise for the pre-rise level
  double dynamic_threshold = 0.5;

  // Motion-coherence test for objects still moving when the sequence ends:
  // an unterminated rise stays dynamic only when a nearby cell shows a
  // complete rise/fall aligned with it and the cell's own occupied span is
  // short enough to be a passing object.
  int coherence_radius = 2;     // cells
  int coherence_window = 5;     // frames between aligned rises
  int coherence_max_tail = 20;  // max occupied frames for an open episode

  // Rectangle fitting and track refinement.
  int min_cells = 4;
  int min_track_length = 3;                    // frames
  double max_speed = 15.0;                     // m/s
  double max_accel = 10.0;                     // m/s^2
  double shape_percentile = 0.9;               // nearest-rank over per-frame fits
  double orientation_from_motion_speed = 1.0;  // m/s
  double assoc_gate = 1.5;                     // m
};

/// Per-cell, per-frame soft dynamic scores. Planes hold -1 where no score is
/// defined (the cell is not an observed occupied cell at that frame).
struct CellClassification {
  GridGeometry geometry;
  std::vector<GridPlane> score;  // one plane per frame
  GridPlane aggregate;           // max episode score per cell, -1 if never occupied

  int frame_count() const { return static_cast<int>(score.size()); }
  bool applicable(int frame, int e, int n) const { return score[frame](n, e) >= 0.0f; }
  bool dynamic_at(int frame, int e, int n, double threshold) const {
    return score[frame](n, e) >= static_cast<float>(threshold);
  }
};

struct Track {
  int id = 0;
  int first_frame = 0;
  std::vector<ObjectBox> boxes;  // contiguous frames starting at first_frame
  double refined_width = 0.0;
  double refined_length = 0.0;
  bool valid = false;

  int last_frame() const { return first_frame + static_cast<int>(boxes.size()) - 1; }
};

struct SequenceLabels {
  std::vector<GridPlane> static_map;           // y_s per frame
  std::vector<std::vector<ObjectBox>> boxes;   // valid-track boxes per frame
};

/// Resamples every frame into the reference frame of frame 0 using the ego
/// poses, so static world cells keep fixed indices across time. Integral
/// cell shifts are exact; fractional shifts use bilinear resampling. Only
/// translational ego motion is supported; heading changes throw.
std::vector<GridFrame> ego_align(const std::vector<GridFrame>& frames);

/// Searches each cell's occupancy probability series for the rise/fall
/// signature of a passing object. Uses only the mass channels; filter
/// velocities never enter. Requires at least 3 frames.
CellClassification classify_cells(const std::vector<GridFrame>& frames,
                                  const AutolabelConfig& config = {});

/// Minimum-area rotated rectangles over 8-connected components of dynamic
/// cells, one list per frame. Components smaller than min_cells are dropped.
std::vector<std::vector<ObjectBox>> fit_rectangles(const CellClassification& classification,
                                                   const AutolabelConfig& config = {});

/// Associates per-frame rectangles into tracks (greedy nearest centroid with
/// gating), refines width/length by percentile over the track and
/// back-propagates the refined extent, smooths orientation toward the motion
/// direction, and invalidates implausible trajectories.
std::vector<Track> refine_tracks(const std::vector<std::vector<ObjectBox>>& per_frame_boxes,
                                 double dt, const AutolabelConfig& config = {});

/// Static occupancy target plus per-frame boxes: the static map equals P_O
/// with dynamic-labeled cells and valid-track interiors removed.
SequenceLabels make_labels(const std::vector<Track>& tracks,
                           const CellClassification& classification,
                           const std::vector<GridFrame>& frames,
                           const AutolabelConfig& config = {});

/// Nearest-rank percentile (q in (0, 1]) of a sample set.
double percentile_nearest_rank(std::vector<double> values, double q);

}  // namespace dogm
