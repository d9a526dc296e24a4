#include "dogm/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace dogm {

RocResult roc_curve(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  require(scores.size() == labels.size() && !scores.empty(), "roc: shape mismatch or empty");
  std::size_t positives = 0;
  for (const std::uint8_t l : labels) positives += l ? 1 : 0;
  const std::size_t negatives = labels.size() - positives;
  require(positives > 0 && negatives > 0, "roc: needs at least one positive and one negative");

  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[a] > scores[b]; });

  RocResult out;
  out.points.reserve(scores.size() + 1);
  std::size_t tp = 0, fp = 0;
  double prev_fpr = 0.0, prev_tpr = 0.0;
  double auc = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double threshold = scores[order[i]];
    while (i < order.size() && scores[order[i]] == threshold) {
      if (labels[order[i]])
        ++tp;
      else
        ++fp;
      ++i;
    }
    const double tpr = static_cast<double>(tp) / positives;
    const double fpr = static_cast<double>(fp) / negatives;
    out.points.push_back({threshold, fpr, tpr});
    auc += 0.5 * (fpr - prev_fpr) * (tpr + prev_tpr);
    prev_fpr = fpr;
    prev_tpr = tpr;
  }
  out.auc = auc;
  return out;
}

MatchResult match_boxes(const std::vector<ObjectBox>& detections,
                        const std::vector<ObjectBox>& ground_truths, double iou_min) {
  std::vector<int> order(detections.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return detections[a].score.value_or(0.0) > detections[b].score.value_or(0.0);
  });

  MatchResult out;
  std::vector<bool> gt_used(ground_truths.size(), false);
  for (const int di : order) {
    int best_gt = -1;
    double best_iou = 0.0;
    for (std::size_t gi = 0; gi < ground_truths.size(); ++gi) {
      if (gt_used[gi]) continue;
      const double iou = rotated_iou(detections[di], ground_truths[gi]);
      if (iou >= iou_min && iou > best_iou) {
        best_iou = iou;
        best_gt = static_cast<int>(gi);
      }
    }
    if (best_gt >= 0) {
      gt_used[best_gt] = true;
      out.pairs.push_back({di, best_gt, best_iou});
    } else {
      out.unmatched_detections.push_back(di);
    }
  }
  for (std::size_t gi = 0; gi < ground_truths.size(); ++gi)
    if (!gt_used[gi]) out.unmatched_ground_truths.push_back(static_cast<int>(gi));
  std::sort(out.unmatched_detections.begin(), out.unmatched_detections.end());
  return out;
}

std::vector<double> default_iou_sweep() {
  std::vector<double> sweep;
  sweep.reserve(100);
  for (int i = 1; i <= 100; ++i) sweep.push_back(i / 100.0);
  return sweep;
}

PrResult precision_recall(const std::vector<std::vector<ObjectBox>>& detections,
                          const std::vector<std::vector<ObjectBox>>& ground_truths,
                          const std::vector<double>& iou_sweep) {
  require(detections.size() == ground_truths.size(), "precision_recall: frame count mismatch");
  require(!iou_sweep.empty(), "precision_recall: empty threshold sweep");
  std::size_t total_gt = 0;
  for (const auto& g : ground_truths) total_gt += g.size();
  require(total_gt > 0, "precision_recall: ground truth empty in every frame");

  PrResult out;
  out.points.reserve(iou_sweep.size());
  double precision_sum = 0.0;
  for (const double threshold : iou_sweep) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t f = 0; f < detections.size(); ++f) {
      const MatchResult m = match_boxes(detections[f], ground_truths[f], threshold);
      tp += m.pairs.size();
      fp += m.unmatched_detections.size();
      fn += m.unmatched_ground_truths.size();
    }
    const double precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 1.0;
    const double recall = static_cast<double>(tp) / (tp + fn);
    out.points.push_back({threshold, recall, precision});
    precision_sum += precision;
  }
  out.ap = precision_sum / static_cast<double>(iou_sweep.size());
  return out;
}

BoxRmse box_rmse(const std::vector<std::pair<ObjectBox, ObjectBox>>& matched_pairs) {
  require(!matched_pairs.empty(), "box_rmse: empty match set");
  double sw = 0.0, sl = 0.0, sp = 0.0, so = 0.0;
  for (const auto& [det, gt] : matched_pairs) {
    const double dw = det.width - gt.width;
    const double dl = det.length - gt.length;
    const double dp = (det.center() - gt.center()).squaredNorm();
    const double dphi = wrap_half_angle(det.orientation - gt.orientation) * 180.0 / kPi;
    sw += dw * dw;
    sl += dl * dl;
    sp += dp;
    so += dphi * dphi;
  }
  const double n = static_cast<double>(matched_pairs.size());
  return BoxRmse{std::sqrt(sw / n), std::sqrt(sl / n), std::sqrt(sp / n), std::sqrt(so / n)};
}

void write_curve_csv(const std::filesystem::path& path, const std::vector<CurvePoint>& points) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_curve_csv: cannot open " + path.string());
  os << "threshold,x,y\n";
  char buf[96];
  for (const CurvePoint& p : points) {
    std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g\n", p.threshold, p.x, p.y);
    os << buf;
  }
}

}  // namespace dogm
