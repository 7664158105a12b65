// Micro-benchmarks for the hot paths: geometry, suppression, label parsing
// and serialization, ranking metrics, merging, and the synthetic predictor.
// All inputs are generated up front so the timed region is the operation
// itself.

#include <benchmark/benchmark.h>

#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "autolabel/geometry.hpp"
#include "autolabel/label_io.hpp"
#include "autolabel/merge.hpp"
#include "autolabel/metrics.hpp"
#include "autolabel/synth.hpp"
#include "autolabel/types.hpp"

using namespace autolabel;

namespace {

double uniform(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

double uniform(std::mt19937_64& gen, double lo, double hi) {
  return lo + (hi - lo) * uniform(gen);
}

NormBBox random_box(std::mt19937_64& gen) {
  const double w = uniform(gen, 0.05, 0.4);
  const double h = uniform(gen, 0.05, 0.4);
  const double cx = uniform(gen, w / 2, 1.0 - w / 2);
  const double cy = uniform(gen, h / 2, 1.0 - h / 2);
  return *NormBBox::make(cx, cy, w, h);
}

PoseInstance random_instance(std::mt19937_64& gen, int keypoint_count) {
  PoseInstance inst;
  inst.bbox = random_box(gen);
  for (int k = 0; k < keypoint_count; ++k) {
    inst.keypoints.push_back(
        *Keypoint::make(uniform(gen), uniform(gen), static_cast<int>(gen() % 3)));
  }
  return inst;
}

std::vector<Detection> random_detections(std::mt19937_64& gen, int count, int keypoint_count) {
  std::vector<Detection> dets;
  dets.reserve(count);
  for (int i = 0; i < count; ++i) {
    const PoseInstance inst = random_instance(gen, keypoint_count);
    if (gen() % 10 < 3) {
      dets.push_back(Detection::original(inst));
    } else {
      dets.push_back(Detection::predicted(inst, uniform(gen, 0.05, 1.0), 1));
    }
  }
  return dets;
}

Manifest bench_manifest(int n_images, int keypoint_count) {
  Manifest manifest;
  manifest.keypoint_count = keypoint_count;
  char buffer[32];
  for (int i = 0; i < n_images; ++i) {
    std::snprintf(buffer, sizeof buffer, "img_%04d", i);
    manifest.records.push_back(ImageRecord{buffer, 640, 480, Split::train});
  }
  return manifest;
}

}  // namespace

static void BM_iou(benchmark::State& state) {
  std::mt19937_64 gen(1);
  const NormBBox a = random_box(gen);
  const NormBBox b = random_box(gen);
  for (auto _ : state) {
    benchmark::DoNotOptimize(iou(a, b));
  }
}
BENCHMARK(BM_iou);

static void BM_nms(benchmark::State& state) {
  std::mt19937_64 gen(2);
  const std::vector<Detection> dets =
      random_detections(gen, static_cast<int>(state.range(0)), 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(nms(dets, 0.3));
  }
}
BENCHMARK(BM_nms)->Arg(8)->Arg(64)->Arg(256);

static void BM_brute_force_nms(benchmark::State& state) {
  std::mt19937_64 gen(2);
  const std::vector<Detection> dets = random_detections(gen, 64, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(brute_force_nms(dets, 0.3));
  }
}
BENCHMARK(BM_brute_force_nms);

static void BM_parse_label_file(benchmark::State& state) {
  std::mt19937_64 gen(3);
  std::vector<PoseInstance> instances;
  for (int i = 0; i < 100; ++i) {
    instances.push_back(random_instance(gen, kDefaultKeypointCount));
  }
  const std::string text = serialize_label_file(instances);
  for (auto _ : state) {
    benchmark::DoNotOptimize(parse_label_file(text, kDefaultKeypointCount));
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(text.size()));
}
BENCHMARK(BM_parse_label_file);

static void BM_serialize_label_file(benchmark::State& state) {
  std::mt19937_64 gen(4);
  std::vector<PoseInstance> instances;
  for (int i = 0; i < 100; ++i) {
    instances.push_back(random_instance(gen, kDefaultKeypointCount));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(serialize_label_file(instances));
  }
}
BENCHMARK(BM_serialize_label_file);

static void BM_average_precision(benchmark::State& state) {
  std::mt19937_64 gen(5);
  const Manifest manifest = bench_manifest(50, 1);
  LabelSet gts;
  PredictionMap preds;
  for (const ImageRecord& rec : manifest.records) {
    auto& image_gts = gts.entries[rec.id];
    for (int g = 0; g < 4; ++g) {
      image_gts.push_back(Detection::original(random_instance(gen, 1)));
    }
    auto& image_preds = preds[rec.id];
    for (int p = 0; p < 6; ++p) {
      image_preds.push_back(
          Detection::predicted(random_instance(gen, 1), uniform(gen, 0.05, 1.0), 1));
    }
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(average_precision(preds, gts, 0.5));
  }
}
BENCHMARK(BM_average_precision);

static void BM_merge_labels(benchmark::State& state) {
  std::mt19937_64 gen(6);
  const Manifest manifest = bench_manifest(100, 5);
  LabelSet current;
  PredictionMap preds;
  PipelineConfig cfg;
  cfg.dataset_root = "unused";
  cfg.work_dir = "unused";
  cfg.keypoint_count = 5;
  for (const ImageRecord& rec : manifest.records) {
    current.entries[rec.id] = {Detection::original(random_instance(gen, 5))};
    auto& image_preds = preds[rec.id];
    for (int p = 0; p < 3; ++p) {
      image_preds.push_back(
          Detection::predicted(random_instance(gen, 5), uniform(gen, 0.5, 1.0), 1));
    }
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(merge_labels(current, preds, manifest, cfg));
  }
}
BENCHMARK(BM_merge_labels);

static void BM_synth_predict(benchmark::State& state) {
  std::mt19937_64 gen(7);
  const Manifest manifest = bench_manifest(100, 5);
  LabelSet gts;
  for (const ImageRecord& rec : manifest.records) {
    gts.entries[rec.id] = {Detection::original(random_instance(gen, 5))};
  }
  const NoiseProfile profile;
  for (auto _ : state) {
    benchmark::DoNotOptimize(synth_predict(gts, profile, manifest));
  }
}
BENCHMARK(BM_synth_predict);

BENCHMARK_MAIN();
