#pragma once

#include <vector>

#include "dogm/geometry.hpp"

namespace dogm {

/// The five output heads: per-cell static occupancy plus the per-anchor
/// detection channels. Shared between label encoding and the loss kernel;
/// scalar type is a template parameter so the loss can run in double while
/// storage stays float.
template <class S>
struct HeadTensors {
  Plane<S> static_map;             // W x H
  std::vector<Plane<S>> iou;       // N_s * N_o channels
  std::vector<Plane<S>> d_width;   // N_s
  std::vector<Plane<S>> d_length;  // N_s
  std::vector<Plane<S>> d_orient;  // N_o

  template <class T>
  HeadTensors<T> cast() const {
    HeadTensors<T> out;
    out.static_map = static_map.template cast<T>();
    auto conv = [](const std::vector<Plane<S>>& src, std::vector<Plane<T>>& dst) {
      dst.reserve(src.size());
      for (const Plane<S>& p : src) dst.push_back(p.template cast<T>());
    };
    conv(iou, out.iou);
    conv(d_width, out.d_width);
    conv(d_length, out.d_length);
    conv(d_orient, out.d_orient);
    return out;
  }
};

}  // namespace dogm
