#pragma once

#include <map>
#include <span>
#include <vector>

#include "nmsforge/box.hpp"
#include "nmsforge/config.hpp"

namespace nmsforge {

/// Result of a suppression engine: kept detection ids in descending score
/// order (ties by ascending id).
struct KeptSet {
  std::vector<int> ids;

  bool empty() const { return ids.empty(); }
  std::size_t size() const { return ids.size(); }
};

/// Reference greedy suppression over a single class: descending-score scan,
/// a box is kept iff its IoU with every already-kept box is < iou_thresh.
/// Equal scores break ties by ascending det_id. Output truncated to top_k.
KeptSet greedy_nms(std::span<const Detection> dets, float iou_thresh, int top_k);

/// Partitions by class_id and runs greedy_nms per class. Classes are
/// independent and run in parallel when config.parallel is set.
std::map<int, KeptSet> greedy_nms_all_classes(std::span<const Detection> dets,
                                              const NmsConfig& config);

}  // namespace nmsforge
