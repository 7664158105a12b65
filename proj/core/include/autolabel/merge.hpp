#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "autolabel/types.hpp"

namespace autolabel {

struct IterationStats {
  int iteration = 0;
  std::int64_t train_images = 0;
  std::int64_t val_images = 0;
  std::int64_t train_labels = 0;
  std::int64_t val_labels = 0;
  std::int64_t total_labels = 0;
  // Percent growth relative to a baseline label set, rounded to one decimal.
  // Absent when no baseline was supplied or a baseline count is zero.
  std::optional<double> train_growth_pct;
  std::optional<double> val_growth_pct;
  std::optional<double> total_growth_pct;
};

// 100 * (n - n0) / n0. Throws errc::zero_baseline when n0 is 0.
double growth_pct(std::int64_t n0, std::int64_t n);

double round_one_decimal(double value);

IterationStats count_stats(const LabelSet& labels, const Manifest& manifest,
                           const LabelSet* baseline = nullptr);

std::string stats_to_json(const IterationStats& stats);

// One refinement step. For every image in a refined split, predictions pass
// the confidence gate, are tagged Predicted(current.iteration + 1), pooled
// after the current detections, and the pool goes through retention-priority
// NMS (the current detections are the protected prefix, so the result is a
// superset of the current labels). Images in other splits are copied
// unchanged. Prediction ids not present in the current set raise
// errc::unknown_image.
LabelSet merge_labels(const LabelSet& current, const PredictionMap& predictions,
                      const Manifest& manifest, const PipelineConfig& cfg);

}  // namespace autolabel
