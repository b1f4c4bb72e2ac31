#pragma once

// Test-only reference for average precision, kept independent of the library
// implementation. Matching labels come from enumerating every injective
// partial assignment of detections to qualified ground-truth boxes and
// selecting the assignment the protocol prefers (detections in descending
// score order, matched when possible, higher IoU first, lower gt index on
// ties). AP is integrated with explicit O(n^2) max-scans over the PR
// staircase.

#include <algorithm>
#include <vector>

#include "nmsforge/box.hpp"

namespace ap_oracle {

inline double box_iou(const nmsforge::BoundingBox& a,
                      const nmsforge::BoundingBox& b) {
  const double aw = a.x2 - a.x1, ah = a.y2 - a.y1;
  const double bw = b.x2 - b.x1, bh = b.y2 - b.y1;
  const double area_a = aw * ah, area_b = bw * bh;
  if (area_a <= 0 || area_b <= 0) return 0.0;
  const double ix = std::min<double>(a.x2, b.x2) - std::max<double>(a.x1, b.x1);
  const double iy = std::min<double>(a.y2, b.y2) - std::max<double>(a.y1, b.y1);
  if (ix <= 0 || iy <= 0) return 0.0;
  return ix * iy / (area_a + area_b - ix * iy);
}

struct Assigned {
  std::vector<int> gt_of_det;  // -1 = unmatched
};

inline void enumerate(const std::vector<nmsforge::Detection>& dets,
                      const std::vector<nmsforge::GroundTruthBox>& gts,
                      double thresh, std::size_t i, std::vector<int>& current,
                      std::vector<bool>& used, std::vector<Assigned>& out) {
  if (i == dets.size()) {
    out.push_back({current});
    return;
  }
  current.push_back(-1);
  enumerate(dets, gts, thresh, i + 1, current, used, out);
  current.pop_back();
  for (std::size_t g = 0; g < gts.size(); ++g) {
    if (used[g]) continue;
    if (box_iou(dets[i].box, gts[g].box) < thresh) continue;
    used[g] = true;
    current.push_back(static_cast<int>(g));
    enumerate(dets, gts, thresh, i + 1, current, used, out);
    current.pop_back();
    used[g] = false;
  }
}

// protocol preference: lexicographic over (matched, iou, -gt_index) per det
inline bool prefer(const Assigned& a, const Assigned& b,
                   const std::vector<nmsforge::Detection>& dets,
                   const std::vector<nmsforge::GroundTruthBox>& gts) {
  for (std::size_t i = 0; i < a.gt_of_det.size(); ++i) {
    const int ga = a.gt_of_det[i], gb = b.gt_of_det[i];
    if ((ga >= 0) != (gb >= 0)) return ga >= 0;
    if (ga < 0) continue;
    const double ia = box_iou(dets[i].box, gts[ga].box);
    const double ib = box_iou(dets[i].box, gts[gb].box);
    if (ia != ib) return ia > ib;
    if (ga != gb) return ga < gb;
  }
  return false;
}

inline double brute_ap(const std::vector<nmsforge::Detection>& dets_in,
                       const std::vector<nmsforge::GroundTruthBox>& gts,
                       double thresh) {
  std::vector<nmsforge::Detection> dets = dets_in;
  std::stable_sort(dets.begin(), dets.end(), [](const auto& a, const auto& b) {
    return a.score > b.score;
  });

  std::vector<Assigned> all;
  std::vector<int> current;
  std::vector<bool> used(gts.size(), false);
  enumerate(dets, gts, thresh, 0, current, used, all);
  Assigned best = all.front();
  for (const Assigned& cand : all) {
    if (prefer(cand, best, dets, gts)) best = cand;
  }

  const std::size_t n = dets.size();
  if (n == 0) return 0.0;
  std::vector<double> precision(n), recall(n);
  int tp = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (best.gt_of_det[k] >= 0) ++tp;
    precision[k] = static_cast<double>(tp) / (k + 1);
    recall[k] = static_cast<double>(tp) / gts.size();
  }
  double ap = 0.0, prev = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (recall[k] <= prev) continue;
    double p_interp = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (recall[j] >= recall[k]) p_interp = std::max(p_interp, precision[j]);
    }
    ap += (recall[k] - prev) * p_interp;
    prev = recall[k];
  }
  return ap;
}

}  // namespace ap_oracle
