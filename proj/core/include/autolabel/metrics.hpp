#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "autolabel/types.hpp"

namespace autolabel {

struct MatchResult {
  struct Pair {
    std::size_t pred_index;
    std::size_t gt_index;
    double iou;
  };
  std::vector<Pair> pairs;                    // in match (prediction priority) order
  std::vector<std::size_t> unmatched_preds;   // ascending
  std::vector<std::size_t> unmatched_gts;     // ascending
};

// Greedy one-image matching: predictions in descending confidence (ties by
// index) each take the still-unmatched ground truth of highest IoU (ties by
// lowest gt index), provided that IoU reaches iou_thr.
MatchResult match_detections(std::span<const Detection> preds,
                             std::span<const PoseInstance> gts, double iou_thr);

// Dataset-wide precision and recall at one IoU threshold. With no
// predictions precision is 1.0; with no ground truths recall is 1.0.
std::pair<double, double> precision_recall(const PredictionMap& preds, const LabelSet& gts,
                                           double iou_thr = 0.5);

// 101-point interpolated average precision at one IoU threshold:
// predictions ranked by descending confidence dataset-wide, matched per
// image, and interpolated precision sampled at recalls 0.00, 0.01, ..., 1.00.
double average_precision(const PredictionMap& preds, const LabelSet& gts, double iou_thr);

// Mean AP over IoU thresholds 0.50, 0.55, ..., 0.95.
double ap_range(const PredictionMap& preds, const LabelSet& gts);

// Mean squared pixel error per coordinate over matched pairs (IoU 0.5),
// restricted to ground-truth keypoints with v > 0; coordinates are scaled to
// pixels by each image's manifest dimensions. nullopt when no keypoint
// contributes.
std::optional<double> keypoint_mse(const PredictionMap& preds, const LabelSet& gts,
                                   const Manifest& manifest);

struct ThresholdCounts {
  double iou_thr = 0.0;
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
};

struct MetricsReport {
  double precision = 0.0;  // at IoU 0.5
  double recall = 0.0;     // at IoU 0.5
  double ap50 = 0.0;
  double ap50_95 = 0.0;
  std::optional<double> mse;
  std::vector<ThresholdCounts> counts;  // one entry per IoU threshold in the 0.50:0.95 range
};

MetricsReport evaluate(const LabelSet& gts, const PredictionMap& preds,
                       const Manifest& manifest);

std::string metrics_to_json(const MetricsReport& report);

}  // namespace autolabel
