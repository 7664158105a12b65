#include "autolabel/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <unordered_map>

#include "autolabel/errors.hpp"
#include "autolabel/geometry.hpp"
#include "json.hpp"

namespace autolabel {

namespace {

constexpr int kRecallPoints = 101;

// IoU thresholds 0.50, 0.55, ..., 0.95.
std::vector<double> range_thresholds() {
  std::vector<double> thresholds;
  thresholds.reserve(10);
  for (int k = 0; k < 10; ++k) thresholds.push_back((50 + 5 * k) / 100.0);
  return thresholds;
}

// Sorted union of the image ids present on either side.
std::vector<std::string> image_ids(const PredictionMap& preds, const LabelSet& gts) {
  std::set<std::string> ids;
  for (const auto& [id, v] : gts.entries) ids.insert(id);
  for (const auto& [id, v] : preds) ids.insert(id);
  return {ids.begin(), ids.end()};
}

std::vector<PoseInstance> gt_instances(const LabelSet& gts, const std::string& id) {
  std::vector<PoseInstance> instances;
  if (const auto it = gts.entries.find(id); it != gts.entries.end()) {
    instances.reserve(it->second.size());
    for (const Detection& det : it->second) instances.push_back(det.instance);
  }
  return instances;
}

std::span<const Detection> pred_span(const PredictionMap& preds, const std::string& id) {
  if (const auto it = preds.find(id); it != preds.end()) return it->second;
  return {};
}

}  // namespace

MatchResult match_detections(std::span<const Detection> preds,
                             std::span<const PoseInstance> gts, double iou_thr) {
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (preds[a].confidence != preds[b].confidence) {
      return preds[a].confidence > preds[b].confidence;
    }
    return a < b;
  });

  std::vector<CornerBox> pred_boxes(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    pred_boxes[i] = to_corners(preds[i].instance.bbox);
  }
  std::vector<CornerBox> gt_boxes(gts.size());
  for (std::size_t i = 0; i < gts.size(); ++i) gt_boxes[i] = to_corners(gts[i].bbox);

  MatchResult result;
  std::vector<char> gt_taken(gts.size(), 0);
  for (std::size_t p : order) {
    std::size_t best_gt = gts.size();
    double best_iou = -1.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (gt_taken[g]) continue;
      const double v = iou(pred_boxes[p], gt_boxes[g]);
      if (v > best_iou) {
        best_iou = v;
        best_gt = g;
      }
    }
    if (best_gt < gts.size() && best_iou >= iou_thr) {
      gt_taken[best_gt] = 1;
      result.pairs.push_back({p, best_gt, best_iou});
    } else {
      result.unmatched_preds.push_back(p);
    }
  }
  std::sort(result.unmatched_preds.begin(), result.unmatched_preds.end());
  for (std::size_t g = 0; g < gts.size(); ++g) {
    if (!gt_taken[g]) result.unmatched_gts.push_back(g);
  }
  return result;
}

std::pair<double, double> precision_recall(const PredictionMap& preds, const LabelSet& gts,
                                           double iou_thr) {
  std::int64_t n_preds = 0, n_gts = 0, tp = 0;
  for (const std::string& id : image_ids(preds, gts)) {
    const auto p = pred_span(preds, id);
    const auto g = gt_instances(gts, id);
    n_preds += static_cast<std::int64_t>(p.size());
    n_gts += static_cast<std::int64_t>(g.size());
    tp += static_cast<std::int64_t>(match_detections(p, g, iou_thr).pairs.size());
  }
  const double precision =
      n_preds > 0 ? static_cast<double>(tp) / static_cast<double>(n_preds) : 1.0;
  const double recall = n_gts > 0 ? static_cast<double>(tp) / static_cast<double>(n_gts) : 1.0;
  return {precision, recall};
}

double average_precision(const PredictionMap& preds, const LabelSet& gts, double iou_thr) {
  struct Ranked {
    double confidence;
    bool tp;
  };
  std::vector<Ranked> ranked;
  std::int64_t n_gts = 0;
  for (const std::string& id : image_ids(preds, gts)) {
    const auto p = pred_span(preds, id);
    const auto g = gt_instances(gts, id);
    n_gts += static_cast<std::int64_t>(g.size());
    const MatchResult match = match_detections(p, g, iou_thr);
    std::vector<char> is_tp(p.size(), 0);
    for (const MatchResult::Pair& pair : match.pairs) is_tp[pair.pred_index] = 1;
    for (std::size_t i = 0; i < p.size(); ++i) {
      ranked.push_back({p[i].confidence, is_tp[i] != 0});
    }
  }
  if (n_gts == 0) return ranked.empty() ? 1.0 : 0.0;
  if (ranked.empty()) return 0.0;

  // Dataset-wide rank by confidence; stable, so ties stay in (image id,
  // input index) enumeration order.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Ranked& a, const Ranked& b) { return a.confidence > b.confidence; });

  const std::size_t n = ranked.size();
  std::vector<double> precision(n), recall(n);
  std::int64_t tp = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (ranked[k].tp) ++tp;
    precision[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
    recall[k] = static_cast<double>(tp) / static_cast<double>(n_gts);
  }
  // Interpolated precision: running maximum from the right.
  for (std::size_t k = n - 1; k-- > 0;) {
    precision[k] = std::max(precision[k], precision[k + 1]);
  }

  double sum = 0.0;
  std::size_t k = 0;
  for (int j = 0; j < kRecallPoints; ++j) {
    const double r = j / 100.0;
    while (k < n && recall[k] < r) ++k;
    if (k == n) break;  // remaining recall points contribute 0
    sum += precision[k];
  }
  return sum / kRecallPoints;
}

double ap_range(const PredictionMap& preds, const LabelSet& gts) {
  const auto thresholds = range_thresholds();
  double sum = 0.0;
  for (double t : thresholds) sum += average_precision(preds, gts, t);
  return sum / static_cast<double>(thresholds.size());
}

std::optional<double> keypoint_mse(const PredictionMap& preds, const LabelSet& gts,
                                   const Manifest& manifest) {
  std::unordered_map<std::string, const ImageRecord*> index;
  index.reserve(manifest.records.size());
  for (const ImageRecord& rec : manifest.records) index.emplace(rec.id, &rec);

  double sum_sq = 0.0;
  std::int64_t n_points = 0;
  for (const std::string& id : image_ids(preds, gts)) {
    const auto p = pred_span(preds, id);
    const auto g = gt_instances(gts, id);
    if (p.empty() || g.empty()) continue;
    const auto rec_it = index.find(id);
    if (rec_it == index.end()) {
      throw Error(errc::unknown_image, "unknown image id '" + id + "'");
    }
    const double width = rec_it->second->width_px;
    const double height = rec_it->second->height_px;
    for (const MatchResult::Pair& pair : match_detections(p, g, 0.5).pairs) {
      const PoseInstance& pred = p[pair.pred_index].instance;
      const PoseInstance& gt = g[pair.gt_index];
      const std::size_t k_max = std::min(pred.keypoints.size(), gt.keypoints.size());
      for (std::size_t k = 0; k < k_max; ++k) {
        if (gt.keypoints[k].v <= 0) continue;
        const double dx = (pred.keypoints[k].x - gt.keypoints[k].x) * width;
        const double dy = (pred.keypoints[k].y - gt.keypoints[k].y) * height;
        sum_sq += dx * dx + dy * dy;
        ++n_points;
      }
    }
  }
  if (n_points == 0) return std::nullopt;
  return sum_sq / (2.0 * static_cast<double>(n_points));
}

MetricsReport evaluate(const LabelSet& gts, const PredictionMap& preds,
                       const Manifest& manifest) {
  std::unordered_map<std::string, char> known;
  known.reserve(manifest.records.size());
  for (const ImageRecord& rec : manifest.records) known.emplace(rec.id, 1);
  for (const auto& [id, v] : preds) {
    if (!known.count(id)) {
      throw Error(errc::unknown_image, "predictions reference unknown image id '" + id + "'");
    }
  }
  for (const auto& [id, v] : gts.entries) {
    if (!known.count(id)) {
      throw Error(errc::unknown_image, "label set references unknown image id '" + id + "'");
    }
  }

  MetricsReport report;
  const auto [precision, recall] = precision_recall(preds, gts, 0.5);
  report.precision = precision;
  report.recall = recall;

  const auto ids = image_ids(preds, gts);
  double ap_sum = 0.0;
  for (double t : range_thresholds()) {
    const double ap = average_precision(preds, gts, t);
    ap_sum += ap;
    ThresholdCounts counts;
    counts.iou_thr = t;
    for (const std::string& id : ids) {
      const MatchResult match = match_detections(pred_span(preds, id), gt_instances(gts, id), t);
      counts.tp += static_cast<std::int64_t>(match.pairs.size());
      counts.fp += static_cast<std::int64_t>(match.unmatched_preds.size());
      counts.fn += static_cast<std::int64_t>(match.unmatched_gts.size());
    }
    if (counts.iou_thr == 0.5) report.ap50 = ap;
    report.counts.push_back(counts);
  }
  report.ap50_95 = ap_sum / 10.0;
  report.mse = keypoint_mse(preds, gts, manifest);
  return report;
}

std::string metrics_to_json(const MetricsReport& report) {
  nlohmann::json j;
  j["precision"] = report.precision;
  j["recall"] = report.recall;
  j["ap50"] = report.ap50;
  j["ap50_95"] = report.ap50_95;
  if (report.mse) {
    j["mse"] = *report.mse;
  } else {
    j["mse"] = nullptr;
  }
  j["counts"] = nlohmann::json::array();
  for (const ThresholdCounts& c : report.counts) {
    j["counts"].push_back(
        {{"iou_thr", c.iou_thr}, {"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}});
  }
  return j.dump();
}

}  // namespace autolabel
