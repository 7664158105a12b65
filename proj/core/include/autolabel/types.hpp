#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace autolabel {

inline constexpr int kDefaultKeypointCount = 51;

/// Axis-aligned box in normalized image coordinates, stored center-size.
struct NormBBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  // Clamps the derived corners to [0,1] and recomputes center/size, so a
  // slightly out-of-frame box is pulled back instead of rejected. Returns
  // nullopt for non-finite or negative-size input, or when the box
  // degenerates to zero width or height after clamping.
  static std::optional<NormBBox> make(double cx, double cy, double w, double h);

  friend bool operator==(const NormBBox&, const NormBBox&) = default;
};

struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  int v = 0;  // 0 = unlabeled, 1 = labeled but occluded, 2 = visible

  // An unlabeled point (v == 0) has its coordinates zeroed; labeled points
  // must lie in [0,1]^2. Rejects v outside {0,1,2} and out-of-range coords.
  static std::optional<Keypoint> make(double x, double y, int v);

  friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

struct PoseInstance {
  int class_id = 0;
  NormBBox bbox;
  std::vector<Keypoint> keypoints;

  friend bool operator==(const PoseInstance&, const PoseInstance&) = default;
};

// Returns one message per violated invariant (with a field path), empty when
// the instance is valid for a dataset with `keypoint_count` points per
// instance. Violations are data; this never throws.
std::vector<std::string> validate_instance(const PoseInstance& inst, int keypoint_count);

struct Source {
  int iteration = 0;  // 0 = original label, i >= 1 = predicted at iteration i

  bool is_original() const { return iteration == 0; }
  static Source original() { return Source{0}; }
  static Source predicted(int iteration) { return Source{iteration}; }

  friend bool operator==(const Source&, const Source&) = default;
};

struct Detection {
  PoseInstance instance;
  double confidence = 1.0;
  Source source;

  static Detection original(PoseInstance inst);
  static Detection predicted(PoseInstance inst, double confidence, int iteration);

  friend bool operator==(const Detection&, const Detection&) = default;
};

enum class Split { train, val };

std::string_view to_string(Split split);
std::optional<Split> split_from_string(std::string_view name);

struct ImageRecord {
  std::string id;
  int width_px = 0;
  int height_px = 0;
  Split split = Split::train;

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

struct Manifest {
  std::vector<ImageRecord> records;
  int keypoint_count = kDefaultKeypointCount;

  const ImageRecord* find(std::string_view id) const;
};

/// One iteration's labels for the whole dataset, keyed by image id. Every
/// key exists in the manifest; images without labels map to an empty list.
struct LabelSet {
  int iteration = 0;
  std::map<std::string, std::vector<Detection>> entries;
};

using PredictionMap = std::map<std::string, std::vector<Detection>>;

struct PipelineConfig {
  double conf_threshold = 0.7;
  double nms_iou = 0.3;
  int iterations = 4;
  int keypoint_count = kDefaultKeypointCount;
  std::string predictor_command = "builtin:synth";
  std::string dataset_root;
  std::string work_dir;
  std::vector<Split> splits_to_refine = {Split::train, Split::val};
  std::uint64_t seed = 0;
  // When set, the run stops early once an iteration gains fewer labels than
  // this many.
  std::optional<double> converge_epsilon;

  bool refines(Split split) const;
};

}  // namespace autolabel
