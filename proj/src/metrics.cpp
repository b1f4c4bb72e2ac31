#include "nmsforge/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

namespace nmsforge {

std::string to_string(OverlapMode m) {
  return m == OverlapMode::kJaccard ? "jaccard" : "recall";
}

OverlapMode overlap_mode_from_string(const std::string& s) {
  if (s == "jaccard") return OverlapMode::kJaccard;
  if (s == "recall") return OverlapMode::kRecallVsOracle;
  throw std::invalid_argument("unknown overlap mode: " + s);
}

OverlapReport overlap_ratio(const KeptSet& approx, const KeptSet& oracle,
                            OverlapMode mode) {
  OverlapReport rep;
  const std::set<int> a(approx.ids.begin(), approx.ids.end());
  const std::set<int> o(oracle.ids.begin(), oracle.ids.end());
  rep.n_approx = static_cast<int>(a.size());
  rep.n_greedy = static_cast<int>(o.size());
  for (int id : a) rep.n_common += o.count(id) ? 1 : 0;

  if (rep.n_approx == 0 && rep.n_greedy == 0) {
    rep.ratio = 1.0;
    return rep;
  }
  if (mode == OverlapMode::kJaccard) {
    const int uni = rep.n_approx + rep.n_greedy - rep.n_common;
    rep.ratio = static_cast<double>(rep.n_common) / uni;
  } else {
    rep.ratio = rep.n_greedy == 0
                    ? 1.0
                    : static_cast<double>(rep.n_common) / rep.n_greedy;
  }
  return rep;
}

double sparsity(const ScoreMapStack& stack) {
  const long total = stack.total_cells();
  if (total == 0) return 0.0;
  return static_cast<double>(stack.non_empty()) / static_cast<double>(total);
}

namespace {

struct ScoredFlag {
  float score;
  bool tp;
};

// Interpolated area under the PR staircase: precision at recall r is the max
// precision among cutoffs with recall >= r.
double area_all_points(const std::vector<ScoredFlag>& flags, int n_gt,
                       std::vector<PrPoint>* curve) {
  std::vector<double> precision, recall;
  int tp = 0, fp = 0;
  for (const auto& f : flags) {
    f.tp ? ++tp : ++fp;
    precision.push_back(static_cast<double>(tp) / (tp + fp));
    recall.push_back(static_cast<double>(tp) / n_gt);
  }
  if (curve != nullptr) {
    curve->clear();
    for (std::size_t i = 0; i < precision.size(); ++i) {
      curve->push_back({recall[i], precision[i]});
    }
  }
  // running max from the right
  for (int i = static_cast<int>(precision.size()) - 2; i >= 0; --i) {
    precision[i] = std::max(precision[i], precision[i + 1]);
  }
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t i = 0; i < precision.size(); ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

double area_eleven_point(const std::vector<ScoredFlag>& flags, int n_gt) {
  std::vector<double> precision, recall;
  int tp = 0, fp = 0;
  for (const auto& f : flags) {
    f.tp ? ++tp : ++fp;
    precision.push_back(static_cast<double>(tp) / (tp + fp));
    recall.push_back(static_cast<double>(tp) / n_gt);
  }
  double ap = 0.0;
  for (int i = 0; i <= 10; ++i) {
    const double r = i / 10.0;
    double p = 0.0;
    for (std::size_t j = 0; j < recall.size(); ++j) {
      if (recall[j] >= r) p = std::max(p, precision[j]);
    }
    ap += p / 11.0;
  }
  return ap;
}

}  // namespace

std::vector<ApResult> voc_ap(
    const std::vector<std::vector<Detection>>& dets_per_image,
    const std::vector<std::vector<GroundTruthBox>>& gt_per_image,
    double iou_match, bool eleven_point) {
  if (dets_per_image.size() != gt_per_image.size()) {
    throw std::invalid_argument("voc_ap: image count mismatch");
  }
  const std::size_t n_images = dets_per_image.size();

  std::set<int> classes;
  std::map<int, int> gt_count;
  for (const auto& gts : gt_per_image) {
    for (const auto& g : gts) {
      classes.insert(g.class_id);
      gt_count[g.class_id]++;
    }
  }
  for (const auto& dets : dets_per_image) {
    for (const auto& d : dets) classes.insert(d.class_id);
  }

  std::vector<ApResult> results;
  for (int cls : classes) {
    if (gt_count[cls] == 0) continue;  // AP undefined without ground truth

    // all detections of this class across images, descending score
    struct Ref {
      float score;
      std::size_t image;
      std::size_t index;
    };
    std::vector<Ref> refs;
    for (std::size_t im = 0; im < n_images; ++im) {
      for (std::size_t i = 0; i < dets_per_image[im].size(); ++i) {
        if (dets_per_image[im][i].class_id == cls) {
          refs.push_back({dets_per_image[im][i].score, im, i});
        }
      }
    }
    std::stable_sort(refs.begin(), refs.end(),
                     [](const Ref& a, const Ref& b) { return a.score > b.score; });

    std::vector<std::vector<bool>> gt_used(n_images);
    for (std::size_t im = 0; im < n_images; ++im) {
      gt_used[im].assign(gt_per_image[im].size(), false);
    }

    std::vector<ScoredFlag> flags;
    for (const Ref& ref : refs) {
      const Detection& det = dets_per_image[ref.image][ref.index];
      const auto& gts = gt_per_image[ref.image];
      int best_gt = -1;
      double best_iou = 0.0;
      for (std::size_t g = 0; g < gts.size(); ++g) {
        if (gts[g].class_id != cls || gt_used[ref.image][g]) continue;
        const double v = iou(det.box, gts[g].box);
        if (v > best_iou) {
          best_iou = v;
          best_gt = static_cast<int>(g);
        }
      }
      const bool tp = best_gt >= 0 && best_iou >= iou_match;
      if (tp) gt_used[ref.image][best_gt] = true;
      flags.push_back({det.score, tp});
    }

    ApResult res;
    res.class_id = cls;
    res.n_gt = gt_count[cls];
    if (flags.empty()) {
      res.ap = 0.0;
    } else if (eleven_point) {
      res.ap = area_eleven_point(flags, res.n_gt);
    } else {
      res.ap = area_all_points(flags, res.n_gt, &res.curve);
    }
    results.push_back(std::move(res));
  }
  return results;
}

double mean_ap(std::span<const ApResult> results) {
  if (results.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& r : results) sum += r.ap;
  return sum / static_cast<double>(results.size());
}

std::string to_string(EngineKind e) {
  switch (e) {
    case EngineKind::kGreedy: return "greedy";
    case EngineKind::kPsrr: return "psrr";
    case EngineKind::kLegacySingle: return "legacy-single";
    case EngineKind::kLegacyRatio: return "legacy-ratio";
    case EngineKind::kLegacyScale: return "legacy-scale";
  }
  return "greedy";
}

EngineKind engine_from_string(const std::string& s) {
  if (s == "greedy") return EngineKind::kGreedy;
  if (s == "psrr") return EngineKind::kPsrr;
  if (s == "legacy-single") return EngineKind::kLegacySingle;
  if (s == "legacy-ratio") return EngineKind::kLegacyRatio;
  if (s == "legacy-scale") return EngineKind::kLegacyScale;
  throw std::invalid_argument("unknown engine: " + s);
}

bool engine_needs_anchors(EngineKind e) {
  return e == EngineKind::kLegacySingle || e == EngineKind::kLegacyRatio ||
         e == EngineKind::kLegacyScale;
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

LegacyVariant legacy_variant(EngineKind e) {
  switch (e) {
    case EngineKind::kLegacyRatio: return LegacyVariant::kRatio;
    case EngineKind::kLegacyScale: return LegacyVariant::kScale;
    default: return LegacyVariant::kSingle;
  }
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double iqr(std::vector<double> v) {
  if (v.size() < 2) return 0.0;
  std::sort(v.begin(), v.end());
  auto quantile = [&](double q) {
    const double pos = q * (v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const double frac = pos - lo;
    return lo + 1 < v.size() ? v[lo] * (1.0 - frac) + v[lo + 1] * frac : v[lo];
  };
  return quantile(0.75) - quantile(0.25);
}

}  // namespace

EngineRun run_engine(EngineKind engine, std::span<const Detection> dets,
                     const NmsConfig& config) {
  EngineRun run;
  switch (engine) {
    case EngineKind::kGreedy:
      run.kept = greedy_nms(dets, config.greedy_iou, config.top_k);
      break;
    case EngineKind::kPsrr: {
      const auto t0 = Clock::now();
      ScoreMapStack stack =
          build_score_maps(dets, config, Projection::kRecovery);
      run.recovery_ms = ms_since(t0);
      const auto t1 = Clock::now();
      stack = pyramid_run(std::move(stack), config.schedule, config, &run.trace);
      run.kept = collect_survivors(stack, config.top_k);
      run.pool_ms = ms_since(t1);
      run.has_phases = true;
      run.has_trace = true;
      break;
    }
    default:
      run.kept =
          maxpoolnms_legacy(dets, config, legacy_variant(engine), &run.trace);
      run.has_trace = true;
      break;
  }
  return run;
}

TimingStats time_engine(EngineKind engine, std::span<const Detection> dets,
                        const NmsConfig& config, int repeats, int warmup) {
  if (repeats < 3) throw std::invalid_argument("time_engine: repeats must be >= 3");
  if (warmup < 1) throw std::invalid_argument("time_engine: warmup must be >= 1");

  TimingStats stats;
  stats.engine = engine;
  stats.n_boxes = static_cast<int>(dets.size());
  stats.has_phases = engine == EngineKind::kPsrr;

  for (int i = 0; i < warmup + repeats; ++i) {
    const auto t0 = Clock::now();
    EngineRun run = run_engine(engine, dets, config);
    const double total = ms_since(t0);
    if (i < warmup) continue;
    stats.samples_ms.push_back(total);
    if (run.has_phases) {
      stats.recovery_ms.push_back(run.recovery_ms);
      stats.pool_ms.push_back(run.pool_ms);
    }
  }
  stats.median_ms = median(stats.samples_ms);
  stats.iqr_ms = iqr(stats.samples_ms);
  if (stats.has_phases) {
    stats.median_recovery_ms = median(stats.recovery_ms);
    stats.median_pool_ms = median(stats.pool_ms);
  }
  return stats;
}

}  // namespace nmsforge
