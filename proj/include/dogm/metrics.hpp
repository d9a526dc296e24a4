#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "dogm/box.hpp"

namespace dogm {

struct CurvePoint {
  double threshold = 0.0;
  double x = 0.0;  // false-positive rate, or recall
  double y = 0.0;  // true-positive rate, or precision
};

struct RocResult {
  std::vector<CurvePoint> points;
  double auc = 0.0;
};

/// ROC over per-item scores and binary labels: TPR/FPR at every distinct
/// score threshold, AUC by trapezoidal integration. Ties share a threshold
/// point. Throws when only one class is present.
RocResult roc_curve(std::span<const double> scores, std::span<const std::uint8_t> labels);

struct MatchPair {
  int detection = -1;
  int ground_truth = -1;
  double iou = 0.0;
};

struct MatchResult {
  std::vector<MatchPair> pairs;
  std::vector<int> unmatched_detections;
  std::vector<int> unmatched_ground_truths;
};

/// Greedy one-to-one matching in descending detection-score order (ties by
/// input order); each detection takes the highest-IoU unmatched ground truth
/// above iou_min.
MatchResult match_boxes(const std::vector<ObjectBox>& detections,
                        const std::vector<ObjectBox>& ground_truths, double iou_min);

struct PrResult {
  std::vector<CurvePoint> points;  // threshold = IoU threshold, x = recall, y = precision
  double ap = 0.0;                 // mean precision over the sweep
};

/// IoU thresholds 0.01 .. 1.00 in steps of 0.01.
std::vector<double> default_iou_sweep();

/// Precision/recall over an IoU-threshold sweep, detections and ground truth
/// given per frame. Precision is 1 when no detections exist at a threshold.
/// Throws when the ground truth is empty in every frame.
PrResult precision_recall(const std::vector<std::vector<ObjectBox>>& detections,
                          const std::vector<std::vector<ObjectBox>>& ground_truths,
                          const std::vector<double>& iou_sweep = default_iou_sweep());

struct BoxRmse {
  double width = 0.0;
  double length = 0.0;
  double position = 0.0;
  double orientation_deg = 0.0;  // wrapped modulo pi, reported in degrees
};

/// RMSE over matched (detection, ground truth) pairs. Throws on an empty set.
BoxRmse box_rmse(const std::vector<std::pair<ObjectBox, ObjectBox>>& matched_pairs);

/// One "threshold,x,y" row per curve point; golden-file stable formatting.
void write_curve_csv(const std::filesystem::path& path, const std::vector<CurvePoint>& points);

}  // namespace dogm
