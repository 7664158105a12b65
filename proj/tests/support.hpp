#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <map>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "autolabel/geometry.hpp"
#include "autolabel/label_io.hpp"
#include "autolabel/metrics.hpp"
#include "autolabel/types.hpp"

namespace testsupport {

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<std::uint64_t> counter{0};
    const std::uint64_t n = counter.fetch_add(1);
    path_ = std::filesystem::temp_directory_path() /
            ("autolabel_test_" + std::to_string(::getpid()) + "_" + std::to_string(n));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Test-local randomness. Raw engine output is scaled by hand so sequences
// are identical across platforms; expected values never come from here.
class TestRng {
 public:
  explicit TestRng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next() { return gen_(); }
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(gen_() % static_cast<std::uint64_t>(hi - lo + 1));
  }
  bool chance(double p) { return uniform() < p; }

 private:
  std::mt19937_64 gen_;
};

inline autolabel::NormBBox random_bbox(TestRng& rng) {
  const double w = rng.uniform(0.05, 0.4);
  const double h = rng.uniform(0.05, 0.4);
  const double cx = rng.uniform(w / 2, 1.0 - w / 2);
  const double cy = rng.uniform(h / 2, 1.0 - h / 2);
  return *autolabel::NormBBox::make(cx, cy, w, h);
}

inline autolabel::PoseInstance random_instance(TestRng& rng, int keypoint_count) {
  autolabel::PoseInstance inst;
  inst.class_id = 0;
  inst.bbox = random_bbox(rng);
  inst.keypoints.reserve(keypoint_count);
  for (int k = 0; k < keypoint_count; ++k) {
    const int v = rng.uniform_int(0, 2);
    inst.keypoints.push_back(
        *autolabel::Keypoint::make(rng.uniform(), rng.uniform(), v));
  }
  return inst;
}

inline double q6(std::int64_t millionths) { return static_cast<double>(millionths) / 1e6; }

// Instance whose values all sit on the 6-decimal grid; box corners use even
// grid steps so the center does too, and corners stay inside [0,1] so
// construction never moves them.
inline autolabel::PoseInstance random_quantized_instance(TestRng& rng, int keypoint_count) {
  autolabel::PoseInstance inst;
  inst.class_id = rng.uniform_int(0, 3);
  const auto even_span = [&](double& center, double& size) {
    const std::int64_t lo = 2 * rng.uniform_int(0, 499998);
    const std::int64_t hi = 2 * rng.uniform_int(static_cast<int>(lo / 2) + 1, 500000);
    center = q6((lo + hi) / 2);
    size = q6(hi - lo);
  };
  double cx = 0, cy = 0, w = 0, h = 0;
  even_span(cx, w);
  even_span(cy, h);
  inst.bbox = *autolabel::NormBBox::make(cx, cy, w, h);
  inst.keypoints.reserve(keypoint_count);
  for (int k = 0; k < keypoint_count; ++k) {
    const int v = rng.uniform_int(0, 2);
    inst.keypoints.push_back(*autolabel::Keypoint::make(
        q6(rng.uniform_int(0, 1000000)), q6(rng.uniform_int(0, 1000000)), v));
  }
  return inst;
}

inline autolabel::Manifest make_manifest(int n_train, int n_val, int keypoint_count,
                                         int width = 640, int height = 480) {
  autolabel::Manifest manifest;
  manifest.keypoint_count = keypoint_count;
  char buffer[32];
  for (int i = 0; i < n_train; ++i) {
    std::snprintf(buffer, sizeof buffer, "train_%04d", i);
    manifest.records.push_back(
        autolabel::ImageRecord{buffer, width, height, autolabel::Split::train});
  }
  for (int i = 0; i < n_val; ++i) {
    std::snprintf(buffer, sizeof buffer, "val_%04d", i);
    manifest.records.push_back(
        autolabel::ImageRecord{buffer, width, height, autolabel::Split::val});
  }
  return manifest;
}

inline void write_dataset(const std::filesystem::path& root, const autolabel::Manifest& manifest,
                          const autolabel::LabelSet& labels) {
  autolabel::write_labels(root, manifest, labels);
  autolabel::write_text_file(root / "manifest.jsonl", autolabel::write_manifest(manifest));
}

// Rasterized IoU: counts cell centers of a uniform grid that land in the
// intersection and in the union. Agrees with the analytic value to O(1/cells).
inline double grid_iou(const autolabel::NormBBox& a, const autolabel::NormBBox& b,
                       int cells = 1000) {
  const autolabel::CornerBox ca = autolabel::to_corners(a);
  const autolabel::CornerBox cb = autolabel::to_corners(b);
  std::int64_t inter = 0;
  std::int64_t uni = 0;
  for (int i = 0; i < cells; ++i) {
    const double x = (i + 0.5) / cells;
    const bool xa = x >= ca.x1 && x <= ca.x2;
    const bool xb = x >= cb.x1 && x <= cb.x2;
    if (!xa && !xb) continue;
    for (int j = 0; j < cells; ++j) {
      const double y = (j + 0.5) / cells;
      const bool in_a = xa && y >= ca.y1 && y <= ca.y2;
      const bool in_b = xb && y >= cb.y1 && y <= cb.y2;
      if (in_a && in_b) ++inter;
      if (in_a || in_b) ++uni;
    }
  }
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

// Reference average precision from first principles: every ranked prefix is
// re-matched from scratch into a (precision, recall) point, and each of the
// 101 recall samples takes the best precision among points reaching it.
// Assumes all confidences are distinct so the ranking is unambiguous.
inline double oracle_average_precision(const autolabel::PredictionMap& preds,
                                       const autolabel::LabelSet& gts, double iou_thr) {
  struct Ref {
    const std::vector<autolabel::Detection>* image_preds;
    const std::vector<autolabel::Detection>* image_gts;
    std::size_t index;
    double confidence;
  };
  static const std::vector<autolabel::Detection> kNone;

  std::vector<Ref> flat;
  std::int64_t n_gts = 0;
  for (const auto& [id, dets] : gts.entries) n_gts += static_cast<std::int64_t>(dets.size());
  for (const auto& [id, dets] : preds) {
    const auto git = gts.entries.find(id);
    const std::vector<autolabel::Detection>* image_gts =
        git != gts.entries.end() ? &git->second : &kNone;
    for (std::size_t i = 0; i < dets.size(); ++i) {
      flat.push_back(Ref{&dets, image_gts, i, dets[i].confidence});
    }
  }
  if (n_gts == 0) return flat.empty() ? 1.0 : 0.0;
  if (flat.empty()) return 0.0;

  std::sort(flat.begin(), flat.end(),
            [](const Ref& a, const Ref& b) { return a.confidence > b.confidence; });

  const auto prefix_true_positives = [&](std::size_t cut) {
    std::int64_t tp = 0;
    // group the prefix by image, preserving confidence order within each
    std::map<const std::vector<autolabel::Detection>*, std::vector<const Ref*>> by_image;
    for (std::size_t i = 0; i < cut; ++i) by_image[flat[i].image_preds].push_back(&flat[i]);
    for (const auto& [image_preds, refs] : by_image) {
      std::vector<const Ref*> ordered = refs;
      std::sort(ordered.begin(), ordered.end(),
                [](const Ref* a, const Ref* b) { return a->confidence > b->confidence; });
      const std::vector<autolabel::Detection>& image_gts = *refs.front()->image_gts;
      std::vector<bool> taken(image_gts.size(), false);
      for (const Ref* ref : ordered) {
        double best = -1.0;
        std::size_t best_gt = 0;
        for (std::size_t g = 0; g < image_gts.size(); ++g) {
          if (taken[g]) continue;
          const double v = autolabel::iou((*image_preds)[ref->index].instance.bbox,
                                          image_gts[g].instance.bbox);
          if (v > best) {
            best = v;
            best_gt = g;
          }
        }
        if (best >= iou_thr) {
          taken[best_gt] = true;
          ++tp;
        }
      }
    }
    return tp;
  };

  std::vector<double> precision(flat.size());
  std::vector<double> recall(flat.size());
  for (std::size_t k = 1; k <= flat.size(); ++k) {
    const std::int64_t tp = prefix_true_positives(k);
    precision[k - 1] = static_cast<double>(tp) / static_cast<double>(k);
    recall[k - 1] = static_cast<double>(tp) / static_cast<double>(n_gts);
  }

  double total = 0.0;
  for (int j = 0; j <= 100; ++j) {
    const double r = j / 100.0;
    double best = 0.0;
    for (std::size_t k = 0; k < flat.size(); ++k) {
      if (recall[k] >= r && precision[k] > best) best = precision[k];
    }
    total += best;
  }
  return total / 101.0;
}

}  // namespace testsupport
