#pragma once

#include <span>

#include "dogm/tensors.hpp"

namespace dogm {

/// Weighting parameters of the training objective. Defaults follow the
/// shared-space setup: unit IoU weight, small offset weights, foreground
/// gain 400 (the background:foreground cell ratio) with focus 4 on the IoU
/// head and 1 on the offset heads.
template <class S>
struct LossConfig {
  S lambda_static = S(0.5);
  S lambda_iou = S(1);
  S lambda_d_width = S(0.01);
  S lambda_d_length = S(0.05);
  S lambda_d_orient = S(0.25);
  S foreground_gain = S(400);  // lambda_I
  S focus_iou = S(4);
  S focus_d_width = S(1);
  S focus_d_length = S(1);
  S focus_d_orient = S(1);

  void validate() const {
    const S zero(0);
    require(lambda_static >= zero && lambda_iou >= zero && lambda_d_width >= zero &&
                lambda_d_length >= zero && lambda_d_orient >= zero,
            "loss: weights must be >= 0");
    require(foreground_gain >= zero, "loss: foreground gain must be >= 0");
    require(focus_iou >= zero && focus_d_width >= zero && focus_d_length >= zero &&
                focus_d_orient >= zero,
            "loss: focus parameters must be >= 0");
  }
};

template <class S>
struct LossBreakdown {
  S total = S(0);
  S static_term = S(0);
  S iou = S(0);
  S d_width = S(0);
  S d_length = S(0);
  S d_orient = S(0);
};

namespace detail {

// Fixed pairwise reduction so results are reproducible run to run.
template <class S>
S pairwise_sum(std::vector<S>& v) {
  if (v.empty()) return S(0);
  size_t n = v.size();
  while (n > 1) {
    const size_t half = (n + 1) / 2;
    for (size_t i = 0; i + half < n; ++i) v[i] += v[i + half];
    n = half;
  }
  return v[0];
}

template <class S>
S weighted_sq_sum(const Plane<S>& pred, const Plane<S>& label, const Plane<S>* weight) {
  require(pred.rows() == label.rows() && pred.cols() == label.cols(),
          "loss: prediction/label shape mismatch");
  std::vector<S> rows(static_cast<size_t>(pred.rows()));
  for (Eigen::Index r = 0; r < pred.rows(); ++r) {
    const auto diff = (pred.row(r) - label.row(r)).square();
    rows[static_cast<size_t>(r)] =
        weight ? (weight->row(r) * diff).sum() : diff.sum();
  }
  return pairwise_sum(rows);
}

}  // namespace detail

/// Euclidean loss of the static head, (lambda / 2) * sum (pred - label)^2.
template <class S>
S static_loss(const Plane<S>& pred, const Plane<S>& label, S lambda) {
  return S(0.5) * lambda * detail::weighted_sq_sum<S>(pred, label, nullptr);
}

/// Spatially balanced per-cell weight 1 + lambda_I * a^f. Background cells
/// (a = 0) weigh exactly 1; 0^0 is defined as 1 so focus 0 degrades to
/// uniform (1 + lambda_I) weighting.
template <class S>
Plane<S> balancing_weight(const Plane<S>& a_map, S foreground_gain, S focus) {
  if (focus == S(0)) return Plane<S>::Constant(a_map.rows(), a_map.cols(), S(1) + foreground_gain);
  return S(1) + foreground_gain * a_map.pow(focus);
}

/// One dynamic head term: (lambda / 2) * sum_c sum_alpha
/// (1 + lambda_I * a(c)^f) * (pred - label)^2.
template <class S>
S dynamic_loss_term(std::span<const Plane<S>> pred, std::span<const Plane<S>> label,
                    const Plane<S>& a_map, S lambda, S foreground_gain, S focus) {
  require(pred.size() == label.size() && !pred.empty(),
          "loss: channel count mismatch or missing head");
  const Plane<S> weight = balancing_weight(a_map, foreground_gain, focus);
  std::vector<S> per_channel(pred.size());
  for (size_t c = 0; c < pred.size(); ++c) {
    require(pred[c].rows() == a_map.rows() && pred[c].cols() == a_map.cols(),
            "loss: tensor/ a-map shape mismatch");
    per_channel[c] = detail::weighted_sq_sum<S>(pred[c], label[c], &weight);
  }
  return S(0.5) * lambda * detail::pairwise_sum(per_channel);
}

/// Total objective L = L_s + L_d^(IoU) + L_d^(dw) + L_d^(dl) + L_d^(dphi)
/// with the per-term breakdown.
template <class S>
LossBreakdown<S> total_loss(const HeadTensors<S>& pred, const HeadTensors<S>& label,
                            const Plane<S>& a_map, const LossConfig<S>& config) {
  config.validate();
  require(pred.static_map.size() > 0 && label.static_map.size() > 0,
          "loss: missing static head");
  require(!pred.iou.empty() && !pred.d_width.empty() && !pred.d_length.empty() &&
              !pred.d_orient.empty(),
          "loss: missing dynamic head");
  LossBreakdown<S> b;
  b.static_term = static_loss<S>(pred.static_map, label.static_map, config.lambda_static);
  b.iou = dynamic_loss_term<S>(pred.iou, label.iou, a_map, config.lambda_iou,
                               config.foreground_gain, config.focus_iou);
  b.d_width = dynamic_loss_term<S>(pred.d_width, label.d_width, a_map, config.lambda_d_width,
                                   config.foreground_gain, config.focus_d_width);
  b.d_length = dynamic_loss_term<S>(pred.d_length, label.d_length, a_map,
                                    config.lambda_d_length, config.foreground_gain,
                                    config.focus_d_length);
  b.d_orient = dynamic_loss_term<S>(pred.d_orient, label.d_orient, a_map,
                                    config.lambda_d_orient, config.foreground_gain,
                                    config.focus_d_orient);
  std::vector<S> terms{b.static_term, b.iou, b.d_width, b.d_length, b.d_orient};
  b.total = detail::pairwise_sum(terms);
  return b;
}

/// Analytic gradient of total_loss with respect to every prediction:
/// lambda * weight * (pred - label) per element.
template <class S>
HeadTensors<S> loss_gradient(const HeadTensors<S>& pred, const HeadTensors<S>& label,
                             const Plane<S>& a_map, const LossConfig<S>& config) {
  config.validate();
  HeadTensors<S> g;
  g.static_map = config.lambda_static * (pred.static_map - label.static_map);
  auto head = [&](const std::vector<Plane<S>>& p, const std::vector<Plane<S>>& l, S lambda,
                  S focus, std::vector<Plane<S>>& out) {
    require(p.size() == l.size() && !p.empty(), "loss: missing head");
    const Plane<S> weight = balancing_weight(a_map, config.foreground_gain, focus);
    out.reserve(p.size());
    for (size_t c = 0; c < p.size(); ++c) out.push_back(lambda * weight * (p[c] - l[c]));
  };
  head(pred.iou, label.iou, config.lambda_iou, config.focus_iou, g.iou);
  head(pred.d_width, label.d_width, config.lambda_d_width, config.focus_d_width, g.d_width);
  head(pred.d_length, label.d_length, config.lambda_d_length, config.focus_d_length,
       g.d_length);
  head(pred.d_orient, label.d_orient, config.lambda_d_orient, config.focus_d_orient,
       g.d_orient);
  return g;
}

}  // namespace dogm
