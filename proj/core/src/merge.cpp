#include "autolabel/merge.hpp"

#include <cmath>
#include <unordered_map>

#include "autolabel/errors.hpp"
#include "autolabel/geometry.hpp"
#include "json.hpp"

namespace autolabel {

double growth_pct(std::int64_t n0, std::int64_t n) {
  if (n0 == 0) {
    throw Error(errc::zero_baseline, "growth undefined for a zero baseline count");
  }
  return 100.0 * static_cast<double>(n - n0) / static_cast<double>(n0);
}

double round_one_decimal(double value) {
  return std::round(value * 10.0) / 10.0;
}

IterationStats count_stats(const LabelSet& labels, const Manifest& manifest,
                           const LabelSet* baseline) {
  std::unordered_map<std::string, Split> split_of;
  split_of.reserve(manifest.records.size());
  for (const ImageRecord& rec : manifest.records) split_of.emplace(rec.id, rec.split);

  const auto tally = [&](const LabelSet& ls, std::int64_t& train_images,
                         std::int64_t& val_images, std::int64_t& train_labels,
                         std::int64_t& val_labels) {
    for (const auto& [id, dets] : ls.entries) {
      const auto it = split_of.find(id);
      if (it == split_of.end()) {
        throw Error(errc::unknown_image, "label set references unknown image id '" + id + "'");
      }
      if (it->second == Split::train) {
        ++train_images;
        train_labels += static_cast<std::int64_t>(dets.size());
      } else {
        ++val_images;
        val_labels += static_cast<std::int64_t>(dets.size());
      }
    }
  };

  IterationStats stats;
  stats.iteration = labels.iteration;
  tally(labels, stats.train_images, stats.val_images, stats.train_labels, stats.val_labels);
  stats.total_labels = stats.train_labels + stats.val_labels;

  if (baseline) {
    std::int64_t bti = 0, bvi = 0, btl = 0, bvl = 0;
    tally(*baseline, bti, bvi, btl, bvl);
    const std::int64_t btotal = btl + bvl;
    if (btl > 0) stats.train_growth_pct = round_one_decimal(growth_pct(btl, stats.train_labels));
    if (bvl > 0) stats.val_growth_pct = round_one_decimal(growth_pct(bvl, stats.val_labels));
    if (btotal > 0) {
      stats.total_growth_pct = round_one_decimal(growth_pct(btotal, stats.total_labels));
    }
  }
  return stats;
}

std::string stats_to_json(const IterationStats& stats) {
  nlohmann::json j;
  j["iteration"] = stats.iteration;
  j["train_images"] = stats.train_images;
  j["val_images"] = stats.val_images;
  j["train_labels"] = stats.train_labels;
  j["val_labels"] = stats.val_labels;
  j["total_labels"] = stats.total_labels;
  if (stats.train_growth_pct) j["train_growth_pct"] = *stats.train_growth_pct;
  if (stats.val_growth_pct) j["val_growth_pct"] = *stats.val_growth_pct;
  if (stats.total_growth_pct) j["total_growth_pct"] = *stats.total_growth_pct;
  return j.dump();
}

LabelSet merge_labels(const LabelSet& current, const PredictionMap& predictions,
                      const Manifest& manifest, const PipelineConfig& cfg) {
  for (const auto& [id, dets] : predictions) {
    if (!current.entries.count(id)) {
      throw Error(errc::unknown_image, "predictions reference unknown image id '" + id + "'");
    }
  }

  const int next_iteration = current.iteration + 1;
  LabelSet merged;
  merged.iteration = next_iteration;
  for (const auto& [id, dets] : current.entries) {
    const ImageRecord* rec = manifest.find(id);
    if (!rec) {
      throw Error(errc::unknown_image, "label set references unknown image id '" + id + "'");
    }
    if (!cfg.refines(rec->split)) {
      merged.entries.emplace(id, dets);
      continue;
    }
    std::vector<Detection> pool = dets;
    if (const auto it = predictions.find(id); it != predictions.end()) {
      for (const Detection& cand : confidence_filter(it->second, cfg.conf_threshold)) {
        pool.push_back(
            Detection::predicted(cand.instance, cand.confidence, next_iteration));
      }
    }
    merged.entries.emplace(id, nms_merge_pool(pool, dets.size(), cfg.nms_iou));
  }
  return merged;
}

}  // namespace autolabel
