#include "nmsforge/greedy.hpp"

#include <algorithm>
#include <numeric>

#include "nmsforge/parallel.hpp"

namespace nmsforge {

KeptSet greedy_nms(std::span<const Detection> dets, float iou_thresh, int top_k) {
  KeptSet kept;
  if (dets.empty() || top_k < 1) return kept;

  std::vector<int> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
    return dets[a].det_id < dets[b].det_id;
  });

  std::vector<int> kept_idx;
  for (int idx : order) {
    bool keep = true;
    for (int k : kept_idx) {
      if (iou(dets[idx].box, dets[k].box) >= iou_thresh) {
        keep = false;
        break;
      }
    }
    if (keep) {
      kept_idx.push_back(idx);
      if (static_cast<int>(kept_idx.size()) == top_k) break;
    }
  }

  kept.ids.reserve(kept_idx.size());
  for (int idx : kept_idx) kept.ids.push_back(dets[idx].det_id);
  return kept;
}

std::map<int, KeptSet> greedy_nms_all_classes(std::span<const Detection> dets,
                                              const NmsConfig& config) {
  std::map<int, std::vector<Detection>> by_class;
  for (const Detection& d : dets) by_class[d.class_id].push_back(d);

  // pre-size both maps so workers only touch their own mapped values
  std::vector<std::pair<const std::vector<Detection>*, KeptSet*>> work;
  std::map<int, KeptSet> out;
  for (const auto& [cls, cdets] : by_class) {
    work.push_back({&cdets, &out[cls]});
  }
  parallel_for(work.size(), config.parallel, [&](std::size_t i) {
    *work[i].second = greedy_nms(*work[i].first, config.greedy_iou, config.top_k);
  });
  return out;
}

}  // namespace nmsforge
