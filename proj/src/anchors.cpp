#include "dogm/anchors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dogm {

void AnchorSet::validate() const {
  require(!sizes.empty() && !orientations.empty(), "anchors: empty size or orientation list");
  for (const auto& [w, l] : sizes)
    require(w > 0.0 && l > 0.0, "anchors: sizes must be positive");
}

AnchorSet AnchorSet::defaults() {
  AnchorSet a;
  a.sizes = {{0.6, 0.6}, {0.6, 1.2}, {0.8, 1.8}, {1.0, 2.5},  {1.8, 4.5},
             {2.0, 5.0}, {2.2, 6.0}, {2.5, 8.0}, {2.6, 10.0}, {2.9, 12.0}};
  a.orientations.reserve(12);
  for (int k = 0; k < 12; ++k) a.orientations.push_back(wrap_half_angle(k * kPi / 12.0));
  return a;
}

LabelTensors encode_labels(const std::vector<ObjectBox>& boxes, const GridGeometry& geometry,
                           const AnchorSet& anchors, const Plane<double>* static_map) {
  anchors.validate();
  require(geometry.valid(), "encode_labels: invalid geometry");
  const int w = geometry.width_cells;
  const int h = geometry.height_cells;
  const int ns = anchors.size_count();
  const int no = anchors.orientation_count();

  LabelTensors lt;
  lt.geometry = geometry;
  lt.heads.static_map =
      static_map ? *static_map : Plane<double>::Zero(h, w);
  require(lt.heads.static_map.rows() == h && lt.heads.static_map.cols() == w,
          "encode_labels: static map shape mismatch");
  lt.heads.iou.assign(anchors.iou_channel_count(), Plane<double>::Zero(h, w));
  lt.heads.d_width.assign(ns, Plane<double>::Zero(h, w));
  lt.heads.d_length.assign(ns, Plane<double>::Zero(h, w));
  lt.heads.d_orient.assign(no, Plane<double>::Zero(h, w));

  // Resolve cell ownership: the box containing the cell center with the
  // largest coverage of the cell square wins.
  Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> owner(h, w);
  owner.setConstant(-1);
  Plane<double> coverage = Plane<double>::Zero(h, w);
  for (size_t bi = 0; bi < boxes.size(); ++bi) {
    const ObjectBox& box = boxes[bi];
    require(box.width > 0.0 && box.length > 0.0, "encode_labels: degenerate box");
    require(geometry.contains_point(box.center()), "encode_labels: box outside grid");

    const auto corners = box.corners();
    double min_e = corners[0].x(), max_e = min_e, min_n = corners[0].y(), max_n = min_n;
    for (const auto& c : corners) {
      min_e = std::min(min_e, c.x());
      max_e = std::max(max_e, c.x());
      min_n = std::min(min_n, c.y());
      max_n = std::max(max_n, c.y());
    }
    const Eigen::Vector2i lo = geometry.world_to_cell({min_e, min_n});
    const Eigen::Vector2i hi = geometry.world_to_cell({max_e, max_n});
    for (int n = std::max(0, lo.y()); n <= std::min(h - 1, hi.y()); ++n) {
      for (int e = std::max(0, lo.x()); e <= std::min(w - 1, hi.x()); ++e) {
        const Eigen::Vector2d cc = geometry.cell_center(e, n);
        if (!box.contains(cc)) continue;
        const ObjectBox cell_box = ObjectBox::make(
            geometry.origin + geometry.cell_size * Eigen::Vector2d(e + 0.5, n + 0.5),
            geometry.cell_size, geometry.cell_size, 0.0);
        const double cov = intersection_area(box, cell_box);
        if (owner(n, e) < 0 || cov > coverage(n, e)) {
          owner(n, e) = static_cast<int>(bi);
          coverage(n, e) = cov;
        }
      }
    }
  }

  for (int n = 0; n < h; ++n) {
    for (int e = 0; e < w; ++e) {
      const int bi = owner(n, e);
      if (bi < 0) continue;
      const ObjectBox& box = boxes[static_cast<size_t>(bi)];
      const Eigen::Vector2d cc = geometry.cell_center(e, n);
      for (int s = 0; s < ns; ++s) {
        lt.heads.d_width[s](n, e) = (box.width - anchors.sizes[s].first) / anchors.sizes[s].first;
        lt.heads.d_length[s](n, e) =
            (box.length - anchors.sizes[s].second) / anchors.sizes[s].second;
        for (int k = 0; k < no; ++k) {
          lt.heads.iou[anchors.channel_index(s, k)](n, e) =
              rotated_iou(anchors.anchor_box(cc, s, k), box);
        }
      }
      for (int k = 0; k < no; ++k) {
        lt.heads.d_orient[k](n, e) =
            wrap_half_angle(box.orientation - anchors.orientations[k]) /
            anchors.orientation_step();
      }
    }
  }
  return lt;
}

namespace {

struct Candidate {
  ObjectBox box;
  double score = 0.0;
};

}  // namespace

std::vector<ObjectBox> decode_detections(const LabelTensors& outputs, const AnchorSet& anchors,
                                         double score_threshold, double nms_iou) {
  anchors.validate();
  const GridGeometry& g = outputs.geometry;
  const int ns = anchors.size_count();
  const int no = anchors.orientation_count();
  require(static_cast<int>(outputs.heads.iou.size()) == anchors.iou_channel_count() &&
              static_cast<int>(outputs.heads.d_width.size()) == ns &&
              static_cast<int>(outputs.heads.d_length.size()) == ns &&
              static_cast<int>(outputs.heads.d_orient.size()) == no,
          "decode_detections: tensor shape does not match anchor set");

  std::vector<Candidate> cands;
  for (int n = 0; n < g.height_cells; ++n) {
    for (int e = 0; e < g.width_cells; ++e) {
      for (int s = 0; s < ns; ++s) {
        for (int k = 0; k < no; ++k) {
          const double score = outputs.heads.iou[anchors.channel_index(s, k)](n, e);
          if (score < score_threshold) continue;
          const double width = anchors.sizes[s].first * (1.0 + outputs.heads.d_width[s](n, e));
          const double length =
              anchors.sizes[s].second * (1.0 + outputs.heads.d_length[s](n, e));
          if (width <= 0.0 || length <= 0.0) continue;
          const double orientation =
              anchors.orientations[k] +
              outputs.heads.d_orient[k](n, e) * anchors.orientation_step();
          cands.push_back(
              {ObjectBox::make(g.cell_center(e, n), width, length, orientation, score),
               score});
        }
      }
    }
  }

  // Stable score ordering, then greedy clustering with weighted fusion.
  std::vector<int> order(cands.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return cands[a].score > cands[b].score; });

  std::vector<bool> used(cands.size(), false);
  std::vector<ObjectBox> detections;
  for (const int seed_idx : order) {
    if (used[seed_idx]) continue;
    const Candidate& seed = cands[seed_idx];
    double weight_sum = 0.0, east = 0.0, north = 0.0, width = 0.0, length = 0.0;
    double ori_cos = 0.0, ori_sin = 0.0, best_score = 0.0;
    for (const int idx : order) {
      if (used[idx]) continue;
      const Candidate& c = cands[idx];
      if (idx != seed_idx && rotated_iou(seed.box, c.box) < nms_iou) continue;
      used[idx] = true;
      weight_sum += c.score;
      east += c.score * c.box.center_east;
      north += c.score * c.box.center_north;
      width += c.score * c.box.width;
      length += c.score * c.box.length;
      ori_cos += c.score * std::cos(2.0 * c.box.orientation);
      ori_sin += c.score * std::sin(2.0 * c.box.orientation);
      best_score = std::max(best_score, c.score);
    }
    if (weight_sum <= 0.0) continue;
    const double orientation = 0.5 * std::atan2(ori_sin, ori_cos);
    detections.push_back(ObjectBox::make({east / weight_sum, north / weight_sum},
                                         width / weight_sum, length / weight_sum, orientation,
                                         best_score));
  }
  return detections;
}

Plane<double> weight_map(const LabelTensors& labels) {
  require(!labels.heads.iou.empty(), "weight_map: labels carry no IoU channels");
  Plane<double> a = labels.heads.iou.front();
  for (size_t c = 1; c < labels.heads.iou.size(); ++c) a = a.max(labels.heads.iou[c]);
  return a.min(1.0).max(0.0);
}

GridFrame pack_label_tensors(const LabelTensors& tensors, const AnchorSet& anchors,
                             double timestamp, const Pose2& ego_pose) {
  anchors.validate();
  GridFrame f;
  f.geometry = tensors.geometry;
  f.timestamp = timestamp;
  f.ego_pose = ego_pose;
  f.channels.reserve(anchors.packed_channel_count());
  for (const auto& p : tensors.heads.iou) f.channels.push_back(p.cast<float>());
  for (const auto& p : tensors.heads.d_width) f.channels.push_back(p.cast<float>());
  for (const auto& p : tensors.heads.d_length) f.channels.push_back(p.cast<float>());
  for (const auto& p : tensors.heads.d_orient) f.channels.push_back(p.cast<float>());
  f.channels.push_back(tensors.heads.static_map.cast<float>());
  return f;
}

LabelTensors unpack_label_tensors(const GridFrame& frame, const AnchorSet& anchors) {
  anchors.validate();
  require(frame.channel_count() == anchors.packed_channel_count(),
          "unpack_label_tensors: channel count does not match anchor set");
  LabelTensors lt;
  lt.geometry = frame.geometry;
  int c = 0;
  auto take = [&]() { return frame.channels[c++].cast<double>(); };
  for (int i = 0; i < anchors.iou_channel_count(); ++i) lt.heads.iou.push_back(take());
  for (int i = 0; i < anchors.size_count(); ++i) lt.heads.d_width.push_back(take());
  for (int i = 0; i < anchors.size_count(); ++i) lt.heads.d_length.push_back(take());
  for (int i = 0; i < anchors.orientation_count(); ++i) lt.heads.d_orient.push_back(take());
  lt.heads.static_map = take();
  return lt;
}

}  // namespace dogm
