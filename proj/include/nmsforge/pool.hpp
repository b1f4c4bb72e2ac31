#pragma once

#include <span>
#include <vector>

#include "nmsforge/config.hpp"
#include "nmsforge/greedy.hpp"
#include "nmsforge/score_map.hpp"

namespace nmsforge {

/// Pooling kernel and stride for one channel, in cells. Stride always equals
/// the kernel size.
struct KernelSpec {
  int k_x = 1;
  int k_y = 1;
  int s_x = 1;
  int s_y = 1;

  bool operator==(const KernelSpec&) const = default;
};

/// Kernel for the channel of a given anchor scale (area) and h:w ratio:
/// the channel box is w = sqrt(scale/ratio), h = sqrt(scale*ratio), and
/// k = stride = max(round(alpha * side / beta), 1) per axis.
KernelSpec kernel_for_channel(float scale, float ratio, float alpha, float beta);

/// Kernels for every channel in the config's fixed channel layout.
std::vector<KernelSpec> channel_kernels(const NmsConfig& config);

/// Componentwise minimum over a channel group's kernels.
KernelSpec group_kernel(std::span<const int> group,
                        std::span<const KernelSpec> per_channel);

/// Channel groups for a stage kind: single = one group per channel; ratio =
/// all ratios of each scale; scale = adjacent-scale pairs per ratio, ascending
/// order; all = every channel in one group.
std::vector<std::vector<int>> make_groups(StageKind kind, const NmsConfig& config);

/// One max-pool-and-unpool pass over a channel group, treated as a 3D block
/// of full depth. The (shifted) plane is tiled with non-overlapping k_y x k_x
/// windows; in each window the single best cell keeps its (score, id) at its
/// original position and every other cell empties. Ties break toward the
/// lowest (channel, y, x). Channels outside the group are untouched. Shift
/// offsets the tiling by (shift_x, shift_y) cells toward the origin, the
/// zero-padded border absorbing the overhang; partial border windows pool
/// as-is.
ScoreMapStack pool_keep(ScoreMapStack stack, std::span<const int> group,
                        const KernelSpec& spec, int shift_x, int shift_y);

/// In-place form of pool_keep; windows are disjoint so each cell is written
/// at most once.
void pool_keep_inplace(ScoreMapStack& stack, std::span<const int> group,
                       const KernelSpec& spec, int shift_x, int shift_y);

/// Applies one stage: per channel group, an unshifted pool_keep, then (when
/// stage.shifted) a second pass shifted by (floor(k_x/2), floor(k_y/2)).
/// Cross-scale groups of one ratio run sequentially in ascending-scale order;
/// disjoint groups may run in parallel when config.parallel is set.
ScoreMapStack run_stage(ScoreMapStack stack, const PoolStage& stage,
                        const NmsConfig& config);

struct StageTraceEntry {
  StageKind kind = StageKind::kSingle;
  bool shifted = false;
  long non_empty = 0;
};

/// Non-empty-cell counts before pooling and after each stage.
struct PyramidTrace {
  long initial_non_empty = 0;
  std::vector<StageTraceEntry> stages;
};

/// Folds run_stage over the schedule in order.
ScoreMapStack pyramid_run(ScoreMapStack stack,
                          std::span<const PoolStage> schedule,
                          const NmsConfig& config,
                          PyramidTrace* trace = nullptr);

/// Gathers the surviving (score, det_id) cells, sorted by descending score
/// (ties by ascending id), truncated to top_k.
KeptSet collect_survivors(const ScoreMapStack& stack, int top_k);

/// PSRR-MaxpoolNMS over one class: relationship-recovery score maps, the
/// config's pyramid schedule, then survivor collection.
KeptSet psrr_nms(std::span<const Detection> dets, const NmsConfig& config,
                 PyramidTrace* trace = nullptr,
                 ProjectionStats* stats = nullptr);

/// Single-scan variants of the original MaxpoolNMS baseline.
enum class LegacyVariant { kSingle, kRatio, kScale };

std::string to_string(LegacyVariant v);

/// Original MaxpoolNMS: anchor-box projection and one unshifted scan of the
/// chosen kind. Requires detections with source anchors.
KeptSet maxpoolnms_legacy(std::span<const Detection> dets,
                          const NmsConfig& config, LegacyVariant variant,
                          PyramidTrace* trace = nullptr);

}  // namespace nmsforge
