#include "nmsforge/score_map.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

namespace nmsforge {

std::string to_string(Projection p) {
  switch (p) {
    case Projection::kRecovery: return "recovery";
    case Projection::kSpatialOnly: return "spatial";
    case Projection::kLegacy: return "legacy";
  }
  return "recovery";
}

Projection projection_from_string(const std::string& s) {
  if (s == "recovery") return Projection::kRecovery;
  if (s == "spatial") return Projection::kSpatialOnly;
  if (s == "legacy") return Projection::kLegacy;
  throw std::invalid_argument("unknown projection: " + s);
}

std::pair<int, int> spatial_recover(float x_c, float y_c, float beta,
                                    int map_w, int map_h) {
  int x = static_cast<int>(std::floor(x_c / beta));
  int y = static_cast<int>(std::floor(y_c / beta));
  x = std::clamp(x, 0, map_w - 1);
  y = std::clamp(y, 0, map_h - 1);
  return {x, y};
}

namespace {

// argmin of |v - entries[i]|, first (smallest) entry wins ties
int nearest_index(float v, std::span<const float> entries, bool log_space) {
  int best = 0;
  float best_d = std::numeric_limits<float>::infinity();
  for (int i = 0; i < static_cast<int>(entries.size()); ++i) {
    const float d = log_space ? std::abs(std::log(v) - std::log(entries[i]))
                              : std::abs(v - entries[i]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

}  // namespace

int channel_recover(float w, float h, std::span<const float> scales,
                    std::span<const float> ratios, bool log_space,
                    ProjectionStats* stats) {
  const int n_ratios = static_cast<int>(ratios.size());
  if (w <= 0.0f || h <= 0.0f) {
    if (stats != nullptr) stats->degenerate++;
    const int ratio_idx = nearest_index(1.0f, ratios, false);
    return 0 * n_ratios + ratio_idx;
  }
  const int scale_idx = nearest_index(w * h, scales, log_space);
  const int ratio_idx = nearest_index(h / w, ratios, log_space);
  return scale_idx * n_ratios + ratio_idx;
}

CellIndex legacy_project(const Detection& det, const NmsConfig& config) {
  if (!det.source.has_value()) {
    throw std::invalid_argument(
        "legacy projection requires detections with source anchors");
  }
  const auto [x, y] =
      spatial_recover(det.source->box.center_x(), det.source->box.center_y(),
                      config.beta, config.map_w(), config.map_h());
  return {det.source->channel, x, y};
}

CellIndex project(const Detection& det, const NmsConfig& config,
                  Projection projection, ProjectionStats* stats) {
  if (projection == Projection::kLegacy) return legacy_project(det, config);

  const auto [x, y] =
      spatial_recover(det.box.center_x(), det.box.center_y(), config.beta,
                      config.map_w(), config.map_h());
  if (projection == Projection::kSpatialOnly) {
    if (!det.source.has_value()) {
      throw std::invalid_argument(
          "spatial-only projection requires detections with source anchors");
    }
    return {det.source->channel, x, y};
  }
  const int channel =
      channel_recover(det.box.width(), det.box.height(), config.scales,
                      config.ratios, config.log_space_channel_distance, stats);
  return {channel, x, y};
}

std::int64_t cell_key(const CellIndex& cell, int map_w, int map_h) {
  return (static_cast<std::int64_t>(cell.channel) * map_h + cell.y) * map_w +
         cell.x;
}

ScoreMapStack make_stack(const NmsConfig& config) {
  ScoreMapStack stack;
  stack.map_w = config.map_w();
  stack.map_h = config.map_h();
  const int n = config.n_channels();
  stack.meta.reserve(n);
  stack.score.reserve(n);
  stack.id.reserve(n);
  for (int c = 0; c < n; ++c) {
    stack.meta.push_back({config.scales[config.scale_index_of(c)],
                          config.ratios[config.ratio_index_of(c)]});
    stack.score.push_back(Eigen::ArrayXXf::Zero(stack.map_h, stack.map_w));
    stack.id.push_back(
        Eigen::ArrayXXi::Constant(stack.map_h, stack.map_w, kEmptyCell));
  }
  return stack;
}

namespace {

void place(ScoreMapStack& stack, std::int64_t key, float score, int det_id) {
  const int cells = stack.map_w * stack.map_h;
  const int c = static_cast<int>(key / cells);
  const int y = static_cast<int>((key % cells) / stack.map_w);
  const int x = static_cast<int>(key % stack.map_w);
  stack.score[c](y, x) = score;
  stack.id[c](y, x) = det_id;
}

// Candidates sorted by det_id give an input-order-independent reduction.
std::vector<std::pair<float, int>> sorted_by_id(const CellBucket& bucket) {
  auto cands = bucket.candidates;
  std::sort(cands.begin(), cands.end(),
            [](const auto& a, const auto& b) { return a.second < b.second; });
  return cands;
}

std::pair<float, int> max_candidate(
    const std::vector<std::pair<float, int>>& cands) {
  std::pair<float, int> best = cands.front();
  for (const auto& c : cands) {
    if (c.first > best.first) best = c;
  }
  return best;
}

}  // namespace

ScoreMapStack assign_scores(const CellBuckets& buckets, const NmsConfig& config,
                            Assignment variant) {
  ScoreMapStack stack = make_stack(config);
  std::mt19937_64 rng(config.seed);

  for (const auto& [key, bucket] : buckets) {
    if (bucket.candidates.empty()) continue;
    const auto cands = sorted_by_id(bucket);
    switch (variant) {
      case Assignment::kMax: {
        const auto [s, id] = max_candidate(cands);
        place(stack, key, s, id);
        break;
      }
      case Assignment::kSum: {
        float sum = 0.0f;
        for (const auto& c : cands) sum += c.first;
        const auto [_, id] = max_candidate(cands);
        place(stack, key, std::min(sum, 1.0f), id);
        break;
      }
      case Assignment::kRandom: {
        std::size_t pick = 0;
        if (cands.size() > 1) {
          std::uniform_int_distribution<std::size_t> dist(0, cands.size() - 1);
          pick = dist(rng);
        }
        place(stack, key, cands[pick].first, cands[pick].second);
        break;
      }
    }
  }
  return stack;
}

ScoreMapStack build_score_maps(std::span<const Detection> dets,
                               const NmsConfig& config, Projection projection,
                               ProjectionStats* stats) {
  if (config.assignment == Assignment::kMax) {
    // Direct scatter: O(N), no bucket materialization. The compare-and-swap
    // rule (higher score, then lower id) is order-independent.
    ScoreMapStack stack = make_stack(config);
    for (const Detection& d : dets) {
      const CellIndex cell = project(d, config, projection, stats);
      float& s = stack.score[cell.channel](cell.y, cell.x);
      int& id = stack.id[cell.channel](cell.y, cell.x);
      if (id == kEmptyCell || d.score > s ||
          (d.score == s && d.det_id < id)) {
        s = d.score;
        id = d.det_id;
      }
    }
    return stack;
  }

  CellBuckets buckets;
  for (const Detection& d : dets) {
    const CellIndex cell = project(d, config, projection, stats);
    buckets[cell_key(cell, config.map_w(), config.map_h())].candidates.push_back(
        {d.score, d.det_id});
  }
  return assign_scores(buckets, config, config.assignment);
}

void write_stack_trace(const ScoreMapStack& stack, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open trace file: " + path);
  out << "channels=" << stack.channels() << " map_h=" << stack.map_h
      << " map_w=" << stack.map_w << "\n";
  out << "scales=";
  for (int c = 0; c < stack.channels(); ++c) {
    if (c) out << ",";
    out << stack.meta[c].scale;
  }
  out << "\nratios=";
  for (int c = 0; c < stack.channels(); ++c) {
    if (c) out << ",";
    out << stack.meta[c].ratio;
  }
  out << "\n";
  for (int c = 0; c < stack.channels(); ++c) {
    out << "channel " << c << " scale " << stack.meta[c].scale << " ratio "
        << stack.meta[c].ratio << "\n";
    for (int y = 0; y < stack.map_h; ++y) {
      for (int x = 0; x < stack.map_w; ++x) {
        if (x) out << " ";
        out << (stack.cell_empty(c, y, x) ? -1.0f : stack.score[c](y, x));
      }
      out << "\n";
    }
    for (int y = 0; y < stack.map_h; ++y) {
      for (int x = 0; x < stack.map_w; ++x) {
        if (x) out << " ";
        out << stack.id[c](y, x);
      }
      out << "\n";
    }
  }
}

}  // namespace nmsforge
