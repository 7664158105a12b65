#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "autolabel/types.hpp"

namespace autolabel {

// One instance per non-empty line: `class cx cy w h (x y v) * K`,
// whitespace-separated; box and keypoint coordinates are normalized reals,
// class id and visibility are integers. Boxes are clamped into frame on
// construction; keypoints must already be in range.
std::vector<PoseInstance> parse_label_file(std::string_view text, int keypoint_count);

// Fixed-point rendering: reals with exactly 6 fractional digits, class id
// and visibility as bare integers, single-space separators, one trailing
// newline per line, empty output for an empty list. Quantized label sets
// round-trip through parse_label_file bit-exactly.
std::string serialize_label_file(std::span<const PoseInstance> instances);

// Line-delimited JSON records {id, width_px, height_px, split}. The record
// schema carries no keypoint count; `keypoint_count` is attached to the
// returned manifest for downstream parsing.
Manifest read_manifest(std::string_view text, int keypoint_count = kDefaultKeypointCount);
std::string write_manifest(const Manifest& manifest);
Manifest load_manifest(const std::filesystem::path& path,
                       int keypoint_count = kDefaultKeypointCount);

// Reads `labels/<split>/<id>.txt` under root for every manifest record; a
// missing label file yields an empty list. Loaded instances become original
// detections with confidence 1.0. Parse errors are annotated with the
// offending file path.
LabelSet load_dataset(const std::filesystem::path& root, const Manifest& manifest);

// Writes `labels/<split>/<id>.txt` under root for every manifest record
// (empty file when an image has no labels).
void write_labels(const std::filesystem::path& root, const Manifest& manifest,
                  const LabelSet& labels);

// Line-delimited JSON records
//   {image_id, confidence, bbox:{cx,cy,w,h}, keypoints:[[x,y,v] * K]},
// grouped by image in input order and tagged Predicted(predicted_iteration).
// Image ids must exist in the manifest; K comes from the manifest.
PredictionMap parse_predictions(std::string_view text, const Manifest& manifest,
                                int predicted_iteration);

// Manifest-free variant for standalone filtering: image ids are not checked
// and K is inferred from the first record when `keypoint_count` is 0.
PredictionMap parse_predictions(std::string_view text, int keypoint_count,
                                int predicted_iteration);

std::string write_predictions(const PredictionMap& predictions);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace autolabel
