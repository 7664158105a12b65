#include "autolabel/geometry.hpp"

#include <algorithm>
#include <numeric>

namespace autolabel {

CornerBox to_corners(const NormBBox& box) {
  const auto clamp01 = [](double v) { return std::clamp(v, 0.0, 1.0); };
  return CornerBox{clamp01(box.cx - box.w / 2.0), clamp01(box.cy - box.h / 2.0),
                   clamp01(box.cx + box.w / 2.0), clamp01(box.cy + box.h / 2.0)};
}

double area(const CornerBox& box) {
  const double w = box.x2 - box.x1;
  const double h = box.y2 - box.y1;
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

double iou(const CornerBox& a, const CornerBox& b) {
  const double ix1 = std::max(a.x1, b.x1);
  const double iy1 = std::max(a.y1, b.y1);
  const double ix2 = std::min(a.x2, b.x2);
  const double iy2 = std::min(a.y2, b.y2);
  const double iw = ix2 - ix1;
  const double ih = iy2 - iy1;
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = area(a) + area(b) - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

double iou(const NormBBox& a, const NormBBox& b) {
  return iou(to_corners(a), to_corners(b));
}

std::vector<Detection> confidence_filter(std::span<const Detection> dets, double tau) {
  std::vector<Detection> kept;
  kept.reserve(dets.size());
  for (const Detection& d : dets) {
    if (d.confidence >= tau) kept.push_back(d);
  }
  return kept;
}

namespace {

std::vector<Detection> nms_impl(std::span<const Detection> dets,
                                std::size_t protected_prefix, double iou_thr) {
  const std::size_t n = dets.size();
  std::vector<char> protect(n);
  for (std::size_t i = 0; i < n; ++i) {
    protect[i] = i < protected_prefix || dets[i].source.is_original();
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (protect[a] != protect[b]) return protect[a] > protect[b];
    if (dets[a].confidence != dets[b].confidence) {
      return dets[a].confidence > dets[b].confidence;
    }
    return a < b;
  });
  std::vector<CornerBox> corners(n);
  for (std::size_t i = 0; i < n; ++i) corners[i] = to_corners(dets[i].instance.bbox);

  std::vector<std::size_t> kept;
  kept.reserve(n);
  for (std::size_t idx : order) {
    bool keep = protect[idx] != 0;
    if (!keep) {
      keep = true;
      for (std::size_t k : kept) {
        if (iou(corners[idx], corners[k]) > iou_thr) {
          keep = false;
          break;
        }
      }
    }
    if (keep) kept.push_back(idx);
  }
  std::vector<Detection> out;
  out.reserve(kept.size());
  for (std::size_t idx : kept) out.push_back(dets[idx]);
  return out;
}

}  // namespace

std::vector<Detection> nms(std::span<const Detection> dets, double iou_thr) {
  return nms_impl(dets, 0, iou_thr);
}

std::vector<Detection> nms_merge_pool(std::span<const Detection> pool,
                                      std::size_t protected_prefix, double iou_thr) {
  return nms_impl(pool, protected_prefix, iou_thr);
}

std::vector<Detection> brute_force_nms(std::span<const Detection> dets, double iou_thr) {
  const std::size_t n = dets.size();
  const auto outranks = [&](std::size_t a, std::size_t b) {
    const bool oa = dets[a].source.is_original();
    const bool ob = dets[b].source.is_original();
    if (oa != ob) return oa;
    if (dets[a].confidence != dets[b].confidence) {
      return dets[a].confidence > dets[b].confidence;
    }
    return a < b;
  };
  // Overlap recomputed from the stored boxes every time, no shared state
  // with nms().
  const auto overlap = [&](std::size_t a, std::size_t b) {
    const NormBBox& A = dets[a].instance.bbox;
    const NormBBox& B = dets[b].instance.bbox;
    const auto c01 = [](double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); };
    const double ax1 = c01(A.cx - A.w / 2.0), ax2 = c01(A.cx + A.w / 2.0);
    const double ay1 = c01(A.cy - A.h / 2.0), ay2 = c01(A.cy + A.h / 2.0);
    const double bx1 = c01(B.cx - B.w / 2.0), bx2 = c01(B.cx + B.w / 2.0);
    const double by1 = c01(B.cy - B.h / 2.0), by2 = c01(B.cy + B.h / 2.0);
    const double iw = std::min(ax2, bx2) - std::max(ax1, bx1);
    const double ih = std::min(ay2, by2) - std::max(ay1, by1);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    const double uni = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter;
    if (uni <= 0.0) return 0.0;
    return inter / uni;
  };

  std::vector<char> visited(n, 0);
  std::vector<std::size_t> kept;
  for (std::size_t step = 0; step < n; ++step) {
    // Select the unvisited candidate that no other unvisited one outranks.
    std::size_t cur = n;
    for (std::size_t i = 0; i < n && cur == n; ++i) {
      if (visited[i]) continue;
      bool top = true;
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i && !visited[j] && outranks(j, i)) {
          top = false;
          break;
        }
      }
      if (top) cur = i;
    }
    visited[cur] = 1;
    bool keep = dets[cur].source.is_original();
    if (!keep) {
      keep = true;
      for (std::size_t k : kept) {
        if (overlap(cur, k) > iou_thr) keep = false;
      }
    }
    if (keep) kept.push_back(cur);
  }
  std::vector<Detection> out;
  out.reserve(kept.size());
  for (std::size_t idx : kept) out.push_back(dets[idx]);
  return out;
}

}  // namespace autolabel
