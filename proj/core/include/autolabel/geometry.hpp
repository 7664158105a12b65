#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "autolabel/types.hpp"

namespace autolabel {

struct CornerBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;
};

// Corner form of a center-size box, corners clamped to [0,1].
CornerBox to_corners(const NormBBox& box);

double area(const CornerBox& box);

// Intersection over union; 0 when the union has zero area.
double iou(const CornerBox& a, const CornerBox& b);
double iou(const NormBBox& a, const NormBBox& b);

// Order-preserving sublist of detections with confidence >= tau.
std::vector<Detection> confidence_filter(std::span<const Detection> dets, double tau);

// Greedy NMS over one image's detections. Candidates are visited in priority
// order: originals before predicted, then descending confidence, ties by
// input index. Originals are always kept; a predicted candidate is kept iff
// its IoU with every already-kept detection is <= iou_thr. The output is in
// visit order.
std::vector<Detection> nms(std::span<const Detection> dets, double iou_thr);

// Same procedure, but the first `protected_prefix` entries of the pool are
// treated like originals: ranked first and kept unconditionally, whatever
// their recorded source. Used when merging predictions into an existing
// label set.
std::vector<Detection> nms_merge_pool(std::span<const Detection> pool,
                                      std::size_t protected_prefix, double iou_thr);

// Reference NMS that re-evaluates the keep rule by repeated scanning instead
// of sorting; quadratic selection, for differential testing against nms().
std::vector<Detection> brute_force_nms(std::span<const Detection> dets, double iou_thr);

}  // namespace autolabel
