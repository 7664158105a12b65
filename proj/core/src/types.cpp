#include "autolabel/types.hpp"

#include <algorithm>
#include <cmath>

namespace autolabel {

std::optional<NormBBox> NormBBox::make(double cx, double cy, double w, double h) {
  if (!std::isfinite(cx) || !std::isfinite(cy) || !std::isfinite(w) || !std::isfinite(h)) {
    return std::nullopt;
  }
  if (w < 0.0 || h < 0.0) {
    return std::nullopt;
  }
  const double x1 = std::clamp(cx - w / 2.0, 0.0, 1.0);
  const double y1 = std::clamp(cy - h / 2.0, 0.0, 1.0);
  const double x2 = std::clamp(cx + w / 2.0, 0.0, 1.0);
  const double y2 = std::clamp(cy + h / 2.0, 0.0, 1.0);
  if (!(x2 > x1) || !(y2 > y1)) {
    return std::nullopt;
  }
  return NormBBox{(x1 + x2) / 2.0, (y1 + y2) / 2.0, x2 - x1, y2 - y1};
}

std::optional<Keypoint> Keypoint::make(double x, double y, int v) {
  if (v < 0 || v > 2) {
    return std::nullopt;
  }
  if (v == 0) {
    return Keypoint{0.0, 0.0, 0};
  }
  if (!(x >= 0.0 && x <= 1.0) || !(y >= 0.0 && y <= 1.0)) {
    return std::nullopt;
  }
  return Keypoint{x, y, v};
}

std::vector<std::string> validate_instance(const PoseInstance& inst, int keypoint_count) {
  std::vector<std::string> violations;
  if (inst.class_id < 0) {
    violations.push_back("class_id negative");
  }
  const NormBBox& b = inst.bbox;
  if (!std::isfinite(b.cx) || !std::isfinite(b.cy) || !std::isfinite(b.w) ||
      !std::isfinite(b.h)) {
    violations.push_back("bbox not finite");
  } else {
    if (!(b.cx >= 0.0 && b.cx <= 1.0)) violations.push_back("bbox.cx out of [0,1]");
    if (!(b.cy >= 0.0 && b.cy <= 1.0)) violations.push_back("bbox.cy out of [0,1]");
    if (!(b.w > 0.0 && b.w <= 1.0)) violations.push_back("bbox.w out of (0,1]");
    if (!(b.h > 0.0 && b.h <= 1.0)) violations.push_back("bbox.h out of (0,1]");
  }
  if (static_cast<int>(inst.keypoints.size()) != keypoint_count) {
    violations.push_back("keypoint count " + std::to_string(inst.keypoints.size()) +
                         " != " + std::to_string(keypoint_count));
  }
  for (std::size_t k = 0; k < inst.keypoints.size(); ++k) {
    const Keypoint& kp = inst.keypoints[k];
    const std::string path = "keypoints[" + std::to_string(k) + "]";
    if (kp.v < 0 || kp.v > 2) {
      violations.push_back(path + ".v not in {0,1,2}");
      continue;
    }
    if (kp.v == 0) {
      if (kp.x != 0.0 || kp.y != 0.0) {
        violations.push_back(path + " unlabeled but has nonzero coordinates");
      }
      continue;
    }
    if (!(kp.x >= 0.0 && kp.x <= 1.0)) violations.push_back(path + ".x out of [0,1]");
    if (!(kp.y >= 0.0 && kp.y <= 1.0)) violations.push_back(path + ".y out of [0,1]");
  }
  return violations;
}

Detection Detection::original(PoseInstance inst) {
  return Detection{std::move(inst), 1.0, Source::original()};
}

Detection Detection::predicted(PoseInstance inst, double confidence, int iteration) {
  return Detection{std::move(inst), confidence, Source::predicted(iteration)};
}

std::string_view to_string(Split split) {
  return split == Split::train ? "train" : "val";
}

std::optional<Split> split_from_string(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  return std::nullopt;
}

const ImageRecord* Manifest::find(std::string_view id) const {
  for (const ImageRecord& rec : records) {
    if (rec.id == id) return &rec;
  }
  return nullptr;
}

bool PipelineConfig::refines(Split split) const {
  return std::find(splits_to_refine.begin(), splits_to_refine.end(), split) !=
         splits_to_refine.end();
}

}  // namespace autolabel
