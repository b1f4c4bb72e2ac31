#pragma once

#include <span>
#include <string>
#include <vector>

#include "nmsforge/box.hpp"
#include "nmsforge/config.hpp"
#include "nmsforge/greedy.hpp"
#include "nmsforge/pool.hpp"

namespace nmsforge {

/// How agreement between an approximate kept set and the oracle's is scored.
/// kJaccard: |common| / |union|. kRecallVsOracle: |common| / |oracle|.
enum class OverlapMode { kJaccard, kRecallVsOracle };

std::string to_string(OverlapMode m);
OverlapMode overlap_mode_from_string(const std::string& s);

struct OverlapReport {
  int n_greedy = 0;
  int n_approx = 0;
  int n_common = 0;
  double ratio = 0.0;
};

/// Agreement between two kept sets drawn from the same candidate pool.
/// Two empty sets agree perfectly (ratio 1).
OverlapReport overlap_ratio(const KeptSet& approx, const KeptSet& oracle,
                            OverlapMode mode = OverlapMode::kJaccard);

/// Fraction of non-empty cells in a stack.
double sparsity(const ScoreMapStack& stack);

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
};

struct ApResult {
  int class_id = 0;
  double ap = 0.0;
  int n_gt = 0;
  std::vector<PrPoint> curve;
};

/// VOC-style average precision per class. Detections are matched to ground
/// truth greedily in descending score order: each detection takes the
/// highest-IoU unmatched ground-truth box of its class in its image when that
/// IoU >= iou_match. AP integrates the interpolated precision-recall curve
/// (all points by default, 11-point when eleven_point is set). Classes with
/// no ground truth are omitted from the result (callers warn).
std::vector<ApResult> voc_ap(
    const std::vector<std::vector<Detection>>& dets_per_image,
    const std::vector<std::vector<GroundTruthBox>>& gt_per_image,
    double iou_match = 0.5, bool eleven_point = false);

double mean_ap(std::span<const ApResult> results);

/// Engines the benchmark harness can time and compare.
enum class EngineKind {
  kGreedy,
  kPsrr,
  kLegacySingle,
  kLegacyRatio,
  kLegacyScale
};

std::string to_string(EngineKind e);
EngineKind engine_from_string(const std::string& s);
bool engine_needs_anchors(EngineKind e);

/// One engine invocation with everything the harness reports on.
struct EngineRun {
  KeptSet kept;
  PyramidTrace trace;       // empty for greedy
  bool has_trace = false;
  double recovery_ms = 0.0; // PSRR phase split
  double pool_ms = 0.0;
  bool has_phases = false;
};

/// Runs one engine over a single-class detection list.
EngineRun run_engine(EngineKind engine, std::span<const Detection> dets,
                     const NmsConfig& config);

struct TimingStats {
  EngineKind engine = EngineKind::kGreedy;
  int n_boxes = 0;
  std::vector<double> samples_ms;
  std::vector<double> recovery_ms;  // per sample, PSRR only
  std::vector<double> pool_ms;
  double median_ms = 0.0;
  double iqr_ms = 0.0;
  double median_recovery_ms = 0.0;
  double median_pool_ms = 0.0;
  bool has_phases = false;
};

/// Wall-clock samples of end-to-end engine time on a monotonic clock, with
/// warmup iterations discarded. Requires repeats >= 3 and warmup >= 1.
TimingStats time_engine(EngineKind engine, std::span<const Detection> dets,
                        const NmsConfig& config, int repeats, int warmup);

}  // namespace nmsforge
