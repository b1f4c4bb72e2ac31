#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace nmsforge {

/// How a cell resolves multiple boxes projected onto it.
enum class Assignment { kMax, kSum, kRandom };

/// Channel-combination kinds for one pooling scan.
enum class StageKind { kSingle, kRatio, kScale, kAll };

std::string to_string(Assignment a);
std::string to_string(StageKind k);
Assignment assignment_from_string(const std::string& s);
StageKind stage_kind_from_string(const std::string& s);

/// One pooling scan in a pyramid schedule. channel_groups is derived from the
/// kind and the config's channel grid; it is filled lazily by the pooling
/// engine when empty (see make_groups).
struct PoolStage {
  StageKind kind = StageKind::kSingle;
  bool shifted = true;
  std::vector<std::vector<int>> channel_groups;
};

/// The default pyramid: single channel, cross ratio, cross scale, cross all
/// channels, each followed by a shifted pass.
inline std::vector<PoolStage> default_schedule() {
  return {{StageKind::kSingle, true, {}},
          {StageKind::kRatio, true, {}},
          {StageKind::kScale, true, {}},
          {StageKind::kAll, true, {}}};
}

/// Shared configuration for every engine. Defaults follow the common
/// 4-scale / 3-ratio anchor grid with alpha 0.75 and down-sampling 16.
struct NmsConfig {
  float alpha = 0.75f;                  // pooling overlap threshold
  float beta = 16.0f;                   // pixels of image per score-map cell
  std::vector<float> scales = {64.0f * 64.0f, 128.0f * 128.0f, 256.0f * 256.0f,
                               512.0f * 512.0f};   // anchor areas, ascending
  std::vector<float> ratios = {0.5f, 1.0f, 2.0f};  // h:w ratios, ascending
  float image_w = 800.0f;
  float image_h = 800.0f;
  int top_k = 200;
  Assignment assignment = Assignment::kMax;
  std::vector<PoolStage> schedule = default_schedule();
  float greedy_iou = 0.5f;              // oracle IoU threshold
  std::uint64_t seed = 0;               // used by random-assign only
  bool log_space_channel_distance = false;  // off-spec variant, off by default
  bool parallel = false;                // enable engine-internal parallelism

  int map_w() const { return static_cast<int>(std::lround(image_w / beta)); }
  int map_h() const { return static_cast<int>(std::lround(image_h / beta)); }
  int n_channels() const {
    return static_cast<int>(scales.size() * ratios.size());
  }
  /// Fixed channel layout: c = scale_index * |ratios| + ratio_index.
  int channel_index(int scale_idx, int ratio_idx) const {
    return scale_idx * static_cast<int>(ratios.size()) + ratio_idx;
  }
  int scale_index_of(int channel) const {
    return channel / static_cast<int>(ratios.size());
  }
  int ratio_index_of(int channel) const {
    return channel % static_cast<int>(ratios.size());
  }

  void validate() const {
    if (!(alpha > 0.0f && alpha <= 1.0f))
      throw std::invalid_argument("config: alpha must be in (0,1]");
    if (!(beta >= 1.0f))
      throw std::invalid_argument("config: beta must be >= 1");
    if (scales.empty() || ratios.empty())
      throw std::invalid_argument("config: scales and ratios must be non-empty");
    for (std::size_t i = 1; i < scales.size(); ++i)
      if (!(scales[i] > scales[i - 1]))
        throw std::invalid_argument("config: scales must be strictly increasing");
    for (std::size_t i = 1; i < ratios.size(); ++i)
      if (!(ratios[i] > ratios[i - 1]))
        throw std::invalid_argument("config: ratios must be strictly increasing");
    for (float s : scales)
      if (!(s > 0.0f) || !std::isfinite(s))
        throw std::invalid_argument("config: scales must be positive and finite");
    for (float r : ratios)
      if (!(r > 0.0f) || !std::isfinite(r))
        throw std::invalid_argument("config: ratios must be positive and finite");
    if (top_k < 1)
      throw std::invalid_argument("config: top_k must be >= 1");
    if (!(image_w > 0.0f && image_h > 0.0f))
      throw std::invalid_argument("config: image dimensions must be positive");
    if (!(greedy_iou > 0.0f && greedy_iou < 1.0f))
      throw std::invalid_argument("config: greedy_iou must be in (0,1)");
    if (schedule.empty())
      throw std::invalid_argument("config: schedule must be non-empty");
    if (map_w() < 1 || map_h() < 1)
      throw std::invalid_argument("config: image too small for beta (empty map)");
  }
};

inline std::string to_string(Assignment a) {
  switch (a) {
    case Assignment::kMax: return "max";
    case Assignment::kSum: return "sum";
    case Assignment::kRandom: return "random";
  }
  return "max";
}

inline std::string to_string(StageKind k) {
  switch (k) {
    case StageKind::kSingle: return "single";
    case StageKind::kRatio: return "ratio";
    case StageKind::kScale: return "scale";
    case StageKind::kAll: return "all";
  }
  return "single";
}

inline Assignment assignment_from_string(const std::string& s) {
  if (s == "max") return Assignment::kMax;
  if (s == "sum") return Assignment::kSum;
  if (s == "random") return Assignment::kRandom;
  throw std::invalid_argument("unknown assignment variant: " + s);
}

inline StageKind stage_kind_from_string(const std::string& s) {
  if (s == "single") return StageKind::kSingle;
  if (s == "ratio") return StageKind::kRatio;
  if (s == "scale") return StageKind::kScale;
  if (s == "all") return StageKind::kAll;
  throw std::invalid_argument("unknown stage kind: " + s);
}

}  // namespace nmsforge
