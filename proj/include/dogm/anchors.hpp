#pragma once

#include <vector>

#include "dogm/box.hpp"
#include "dogm/grid.hpp"
#include "dogm/tensors.hpp"

namespace dogm {

/// Default boxes: every (size, orientation) pair is one anchor; the IoU
/// channel of anchor (s, k) is s * orientation_count + k.
struct AnchorSet {
  std::vector<std::pair<double, double>> sizes;  // (width, length), meters
  std::vector<double> orientations;              // radians, canonical in [-pi/2, pi/2)

  int size_count() const { return static_cast<int>(sizes.size()); }
  int orientation_count() const { return static_cast<int>(orientations.size()); }
  int iou_channel_count() const { return size_count() * orientation_count(); }
  int channel_index(int size_index, int orient_index) const {
    return size_index * orientation_count() + orient_index;
  }
  /// Channels of a packed tensor frame: IoU block, d_width, d_length,
  /// d_orient, static map.
  int packed_channel_count() const {
    return iou_channel_count() + 2 * size_count() + orientation_count() + 1;
  }
  double orientation_step() const { return kPi / orientation_count(); }

  ObjectBox anchor_box(const Eigen::Vector2d& center, int size_index, int orient_index) const {
    return ObjectBox::make(center, sizes[size_index].first, sizes[size_index].second,
                           orientations[orient_index]);
  }

  void validate() const;

  /// Pedestrian through truck sizes with 12 orientations at 15 degrees,
  /// giving 120 IoU channels.
  static AnchorSet defaults();
};

/// Per-frame label tensors in the anchor parameterization.
struct LabelTensors {
  GridGeometry geometry;
  HeadTensors<double> heads;
};

/// Rasterizes object boxes into label tensors. Every cell whose center lies
/// inside a box gets the full anchor IoU sweep plus relative size offsets
/// (w_obj - w_s) / w_s and normalized orientation offsets
/// wrap_pi(phi_obj - phi_k) / (pi / N_o); cells covered by several boxes
/// belong to the box covering most of the cell. The static map channel is
/// left zero unless provided.
LabelTensors encode_labels(const std::vector<ObjectBox>& boxes, const GridGeometry& geometry,
                           const AnchorSet& anchors,
                           const Plane<double>* static_map = nullptr);

/// Reconstructs scored boxes from output tensors: per (cell, anchor)
/// candidates above score_threshold, clustered by mutual rotated IoU;
/// each cluster emits the score-weighted mean box carrying the cluster's
/// maximum score.
std::vector<ObjectBox> decode_detections(const LabelTensors& outputs, const AnchorSet& anchors,
                                         double score_threshold, double nms_iou);

/// Spatial weight map A(c): best anchor IoU per cell, clamped to [0, 1];
/// exactly 0 on background cells.
Plane<double> weight_map(const LabelTensors& labels);

/// Packs label tensors into a float grid frame using the documented channel
/// order (IoU block, d_width, d_length, d_orient, static map).
GridFrame pack_label_tensors(const LabelTensors& tensors, const AnchorSet& anchors,
                             double timestamp = 0.0, const Pose2& ego_pose = {});

LabelTensors unpack_label_tensors(const GridFrame& frame, const AnchorSet& anchors);

}  // namespace dogm
