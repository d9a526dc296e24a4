#include "dogm/autolabel.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace dogm {
namespace {

struct Episode {
  int start = 0;      // first frame with P >= p_high
  int last_high = 0;  // last frame with P >= p_high
  int end = -1;       // first frame with P <= p_low after start; -1 if never
  float rise_strength = 0.0f;
  bool terminated() const { return end >= 0; }
};

std::vector<Episode> scan_episodes(const float* series, int frame_count,
                                   const AutolabelConfig& cfg) {
  std::vector<Episode> episodes;
  bool active = false;
  Episode cur;
  for (int t = 0; t < frame_count; ++t) {
    const float p = series[t];
    if (!active) {
      if (p >= cfg.p_high) {
        active = true;
        cur = Episode{};
        cur.start = t;
        cur.last_high = t;
        float pre = 0.5f;  // unknown when the series starts occupied
        if (t > 0) {
          pre = series[t - 1];
          for (int k = std::max(0, t - cfg.pre_window); k < t; ++k)
            pre = std::min(pre, series[k]);
        }
        const float swing = series[t] - pre;
        const float denom = static_cast<float>(cfg.p_high - cfg.p_low);
        cur.rise_strength =
            t == 0 ? 0.0f : std::clamp(swing / denom, 0.0f, 1.0f);
      }
    } else {
      if (p >= cfg.p_high) cur.last_high = t;
      if (p <= cfg.p_low) {
        cur.end = t;
        episodes.push_back(cur);
        active = false;
      }
    }
  }
  if (active) episodes.push_back(cur);
  return episodes;
}

}  // namespace

std::vector<GridFrame> ego_align(const std::vector<GridFrame>& frames) {
  require(!frames.empty(), "ego_align: empty sequence");
  const Pose2 ref = frames.front().ego_pose;
  require(std::isfinite(ref.east) && std::isfinite(ref.north) && std::isfinite(ref.heading),
          "ego_align: ego pose missing or non-finite");

  std::vector<GridFrame> out;
  out.reserve(frames.size());
  for (const GridFrame& f : frames) {
    require(std::isfinite(f.ego_pose.east) && std::isfinite(f.ego_pose.north) &&
                std::isfinite(f.ego_pose.heading),
            "ego_align: ego pose missing or non-finite");
    require(std::abs(wrap_angle(f.ego_pose.heading - ref.heading)) < 1e-9,
            "ego_align: rotational ego motion is not supported");
    const Eigen::Vector2d delta =
        (f.ego_pose.position() - ref.position()) / f.geometry.cell_size;
    if (delta.x() == 0.0 && delta.y() == 0.0) {
      out.push_back(f);
      continue;
    }

    GridFrame a = f;
    const int w = f.geometry.width_cells;
    const int h = f.geometry.height_cells;
    const double ie = std::round(delta.x());
    const double in = std::round(delta.y());
    const bool integral =
        std::abs(delta.x() - ie) < 1e-9 && std::abs(delta.y() - in) < 1e-9;
    for (size_t c = 0; c < f.channels.size(); ++c) {
      const GridPlane& src = f.channels[c];
      GridPlane dst = GridPlane::Zero(h, w);
      if (integral) {
        const int de = static_cast<int>(ie);
        const int dn = static_cast<int>(in);
        for (int n = 0; n < h; ++n) {
          const int sn = n - dn;
          if (sn < 0 || sn >= h) continue;
          for (int e = 0; e < w; ++e) {
            const int se = e - de;
            if (se < 0 || se >= w) continue;
            dst(n, e) = src(sn, se);
          }
        }
      } else {
        for (int n = 0; n < h; ++n) {
          const double sn = n - delta.y();
          const int n0 = static_cast<int>(std::floor(sn));
          const double fn = sn - n0;
          if (n0 < -1 || n0 >= h) continue;
          for (int e = 0; e < w; ++e) {
            const double se = e - delta.x();
            const int e0 = static_cast<int>(std::floor(se));
            const double fe = se - e0;
            if (e0 < -1 || e0 >= w) continue;
            auto at = [&](int nn, int ee) -> double {
              return (nn >= 0 && nn < h && ee >= 0 && ee < w) ? src(nn, ee) : 0.0;
            };
            dst(n, e) = static_cast<float>(
                (1.0 - fn) * ((1.0 - fe) * at(n0, e0) + fe * at(n0, e0 + 1)) +
                fn * ((1.0 - fe) * at(n0 + 1, e0) + fe * at(n0 + 1, e0 + 1)));
          }
        }
      }
      a.channels[c] = std::move(dst);
    }
    out.push_back(std::move(a));
  }
  return out;
}

CellClassification classify_cells(const std::vector<GridFrame>& frames,
                                  const AutolabelConfig& cfg) {
  require(frames.size() >= 3, "classify_cells: need at least 3 frames");
  const GridGeometry g = frames.front().geometry;
  const int T = static_cast<int>(frames.size());
  const int w = g.width_cells;
  const int h = g.height_cells;

  // Cell-major occupancy probability series.
  std::vector<float> series(static_cast<size_t>(w) * h * T);
  for (int t = 0; t < T; ++t) {
    require(frames[t].geometry == g, "classify_cells: geometry mismatch");
    const GridPlane po = occupancy_probability(frames[t]);
    const float* src = po.data();
    for (int i = 0; i < w * h; ++i) series[static_cast<size_t>(i) * T + t] = src[i];
  }

  std::vector<std::vector<Episode>> episodes(static_cast<size_t>(w) * h);
  for (int i = 0; i < w * h; ++i)
    episodes[i] = scan_episodes(&series[static_cast<size_t>(i) * T], T, cfg);

  // Motion-coherence corroboration for episodes that never fall: a nearby
  // complete episode whose rise aligns with ours marks a moving front cut
  // off by the sequence end.
  auto coherent_neighbor = [&](int e, int n, const Episode& ep) {
    for (int dn = -cfg.coherence_radius; dn <= cfg.coherence_radius; ++dn) {
      for (int de = -cfg.coherence_radius; de <= cfg.coherence_radius; ++de) {
        if (de == 0 && dn == 0) continue;
        const int ee = e + de;
        const int nn = n + dn;
        if (ee < 0 || ee >= w || nn < 0 || nn >= h) continue;
        for (const Episode& other : episodes[static_cast<size_t>(nn) * w + ee]) {
          if (!other.terminated()) continue;
          if (std::abs(other.start - ep.start) <= cfg.coherence_window &&
              other.end >= ep.start)
            return true;
        }
      }
    }
    return false;
  };

  CellClassification cls;
  cls.geometry = g;
  cls.score.assign(T, GridPlane::Constant(h, w, -1.0f));
  cls.aggregate = GridPlane::Constant(h, w, -1.0f);

  for (int n = 0; n < h; ++n) {
    for (int e = 0; e < w; ++e) {
      const size_t idx = static_cast<size_t>(n) * w + e;
      float agg = episodes[idx].empty() ? -1.0f : 0.0f;
      for (const Episode& ep : episodes[idx]) {
        float s;
        if (ep.terminated()) {
          s = ep.rise_strength;  // the observed fall corroborates in full
        } else {
          const bool eligible = ep.start > 0 &&
                                ep.last_high - ep.start <= cfg.coherence_max_tail;
          s = eligible && coherent_neighbor(e, n, ep) ? ep.rise_strength : 0.0f;
        }
        const int stop = ep.terminated() ? ep.end - 1 : T - 1;
        for (int t = ep.start; t <= stop; ++t) cls.score[t](n, e) = s;
        agg = std::max(agg, s);
      }
      cls.aggregate(n, e) = agg;
    }
  }
  return cls;
}

std::vector<std::vector<ObjectBox>> fit_rectangles(const CellClassification& cls,
                                                   const AutolabelConfig& cfg) {
  const GridGeometry& g = cls.geometry;
  const int w = g.width_cells;
  const int h = g.height_cells;
  std::vector<std::vector<ObjectBox>> out(cls.score.size());

  std::vector<std::uint8_t> mask(static_cast<size_t>(w) * h);
  std::vector<int> stack;
  for (size_t t = 0; t < cls.score.size(); ++t) {
    const GridPlane& plane = cls.score[t];
    for (int i = 0; i < w * h; ++i)
      mask[i] = plane.data()[i] >= static_cast<float>(cfg.dynamic_threshold) ? 1 : 0;

    for (int start = 0; start < w * h; ++start) {
      if (!mask[start]) continue;
      // 8-connected component flood fill.
      std::vector<int> cells;
      stack.assign(1, start);
      mask[start] = 0;
      while (!stack.empty()) {
        const int cur = stack.back();
        stack.pop_back();
        cells.push_back(cur);
        const int ce = cur % w;
        const int cn = cur / w;
        for (int dn = -1; dn <= 1; ++dn) {
          for (int de = -1; de <= 1; ++de) {
            const int ee = ce + de;
            const int nn = cn + dn;
            if (ee < 0 || ee >= w || nn < 0 || nn >= h) continue;
            const int ni = nn * w + ee;
            if (mask[ni]) {
              mask[ni] = 0;
              stack.push_back(ni);
            }
          }
        }
      }
      if (static_cast<int>(cells.size()) < cfg.min_cells) continue;

      std::vector<Eigen::Vector2d> corners;
      corners.reserve(cells.size() * 4);
      for (const int c : cells) {
        const int ce = c % w;
        const int cn = c / w;
        const Eigen::Vector2d base = g.origin + g.cell_size * Eigen::Vector2d(ce, cn);
        corners.push_back(base);
        corners.emplace_back(base.x() + g.cell_size, base.y());
        corners.emplace_back(base.x(), base.y() + g.cell_size);
        corners.emplace_back(base.x() + g.cell_size, base.y() + g.cell_size);
      }
      out[t].push_back(min_area_rect(corners));
    }
  }
  return out;
}

double percentile_nearest_rank(std::vector<double> values, double q) {
  require(!values.empty() && q > 0.0 && q <= 1.0, "percentile: bad input");
  std::sort(values.begin(), values.end());
  const size_t rank = static_cast<size_t>(
      std::ceil(q * static_cast<double>(values.size())));
  return values[std::max<size_t>(rank, 1) - 1];
}

std::vector<Track> refine_tracks(const std::vector<std::vector<ObjectBox>>& per_frame,
                                 double dt, const AutolabelConfig& cfg) {
  require(dt > 0.0, "refine_tracks: dt must be > 0");
  std::vector<Track> tracks;
  std::vector<int> open;  // indices of tracks matched in the previous frame

  for (size_t t = 0; t < per_frame.size(); ++t) {
    const std::vector<ObjectBox>& boxes = per_frame[t];
    // Greedy nearest-centroid association within the gate.
    struct Cand {
      double dist;
      int track_slot;
      int box_index;
    };
    std::vector<Cand> cands;
    for (size_t s = 0; s < open.size(); ++s) {
      const ObjectBox& last = tracks[open[s]].boxes.back();
      for (size_t b = 0; b < boxes.size(); ++b) {
        const double d = (last.center() - boxes[b].center()).norm();
        if (d <= cfg.assoc_gate)
          cands.push_back({d, static_cast<int>(s), static_cast<int>(b)});
      }
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      return a.dist < b.dist ||
             (a.dist == b.dist && std::tie(a.track_slot, a.box_index) <
                                      std::tie(b.track_slot, b.box_index));
    });
    std::vector<bool> track_used(open.size(), false), box_used(boxes.size(), false);
    std::vector<int> next_open;
    for (const Cand& c : cands) {
      if (track_used[c.track_slot] || box_used[c.box_index]) continue;
      track_used[c.track_slot] = true;
      box_used[c.box_index] = true;
      tracks[open[c.track_slot]].boxes.push_back(boxes[c.box_index]);
      next_open.push_back(open[c.track_slot]);
    }
    for (size_t b = 0; b < boxes.size(); ++b) {
      if (box_used[b]) continue;
      Track tr;
      tr.id = static_cast<int>(tracks.size());
      tr.first_frame = static_cast<int>(t);
      tr.boxes.push_back(boxes[b]);
      tracks.push_back(std::move(tr));
      next_open.push_back(tracks.back().id);
    }
    std::sort(next_open.begin(), next_open.end());
    open.swap(next_open);
  }

  for (Track& tr : tracks) {
    const int len = static_cast<int>(tr.boxes.size());

    // Refined extent: high percentile over per-frame fits, back-propagated so
    // partially observed frames inherit the full size.
    std::vector<double> ws, ls;
    for (const ObjectBox& b : tr.boxes) {
      ws.push_back(b.width);
      ls.push_back(b.length);
    }
    tr.refined_width = percentile_nearest_rank(ws, cfg.shape_percentile);
    tr.refined_length = percentile_nearest_rank(ls, cfg.shape_percentile);
    if (tr.refined_width > tr.refined_length) std::swap(tr.refined_width, tr.refined_length);
    for (ObjectBox& b : tr.boxes) {
      b.width = tr.refined_width;
      b.length = tr.refined_length;
    }

    // Plausibility gates.
    tr.valid = len >= cfg.min_track_length;
    std::vector<Eigen::Vector2d> vel(std::max(0, len - 1));
    for (int i = 0; i + 1 < len; ++i) {
      vel[i] = (tr.boxes[i + 1].center() - tr.boxes[i].center()) / dt;
      if (vel[i].norm() > cfg.max_speed) tr.valid = false;
    }
    for (int i = 0; i + 2 < len; ++i) {
      if ((vel[i + 1] - vel[i]).norm() / dt > cfg.max_accel) tr.valid = false;
    }

    // Orientation from motion when the track moves fast enough for the
    // heading to be observable from displacement.
    for (int i = 0; i < len; ++i) {
      const Eigen::Vector2d v = len < 2 ? Eigen::Vector2d::Zero()
                                : i == 0 ? vel.front()
                                : i == len - 1 ? vel.back()
                                               : 0.5 * (vel[i - 1] + vel[i]);
      if (v.norm() > cfg.orientation_from_motion_speed)
        tr.boxes[i].orientation = wrap_half_angle(std::atan2(v.y(), v.x()));
    }
  }
  return tracks;
}

SequenceLabels make_labels(const std::vector<Track>& tracks,
                           const CellClassification& cls,
                           const std::vector<GridFrame>& frames,
                           const AutolabelConfig& cfg) {
  require(frames.size() == cls.score.size(), "make_labels: frame count mismatch");
  const GridGeometry& g = cls.geometry;
  SequenceLabels out;
  out.static_map.reserve(frames.size());
  out.boxes.assign(frames.size(), {});

  for (const Track& tr : tracks) {
    if (!tr.valid) continue;
    for (size_t i = 0; i < tr.boxes.size(); ++i)
      out.boxes[tr.first_frame + i].push_back(tr.boxes[i]);
  }

  const float thr = static_cast<float>(cfg.dynamic_threshold);
  for (size_t t = 0; t < frames.size(); ++t) {
    GridPlane ys = occupancy_probability(frames[t]);
    const GridPlane& sc = cls.score[t];
    for (int n = 0; n < g.height_cells; ++n)
      for (int e = 0; e < g.width_cells; ++e)
        if (sc(n, e) >= thr) ys(n, e) = 0.0f;
    for (const ObjectBox& b : out.boxes[t]) {
      // Remove every cell whose center lies inside a labeled object.
      const auto corners = b.corners();
      double min_e = corners[0].x(), max_e = corners[0].x();
      double min_n = corners[0].y(), max_n = corners[0].y();
      for (const auto& c : corners) {
        min_e = std::min(min_e, c.x());
        max_e = std::max(max_e, c.x());
        min_n = std::min(min_n, c.y());
        max_n = std::max(max_n, c.y());
      }
      const Eigen::Vector2i lo = g.world_to_cell({min_e, min_n});
      const Eigen::Vector2i hi = g.world_to_cell({max_e, max_n});
      for (int n = std::max(0, lo.y()); n <= std::min(g.height_cells - 1, hi.y()); ++n)
        for (int e = std::max(0, lo.x()); e <= std::min(g.width_cells - 1, hi.x()); ++e)
          if (b.contains(g.cell_center(e, n))) ys(n, e) = 0.0f;
    }
    out.static_map.push_back(std::move(ys));
  }
  return out;
}

}  // namespace dogm
