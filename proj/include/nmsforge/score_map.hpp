#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nmsforge/box.hpp"
#include "nmsforge/config.hpp"

namespace nmsforge {

/// The (scale, ratio) combination a channel encodes.
struct ChannelMeta {
  float scale = 0.0f;  // anchor area, pixels^2
  float ratio = 0.0f;  // h:w
};

constexpr int kEmptyCell = -1;

/// Per-class confidence score maps: one map_h x map_w plane per channel.
/// A cell holds the score and det_id of at most one box; id(c)(y,x) ==
/// kEmptyCell marks an empty cell (its score plane entry is 0).
struct ScoreMapStack {
  int map_w = 0;
  int map_h = 0;
  std::vector<ChannelMeta> meta;
  std::vector<Eigen::ArrayXXf> score;  // indexed (y, x)
  std::vector<Eigen::ArrayXXi> id;

  int channels() const { return static_cast<int>(meta.size()); }
  bool cell_empty(int c, int y, int x) const { return id[c](y, x) == kEmptyCell; }

  void clear_cell(int c, int y, int x) {
    id[c](y, x) = kEmptyCell;
    score[c](y, x) = 0.0f;
  }

  long non_empty() const {
    long n = 0;
    for (const auto& plane : id) n += (plane != kEmptyCell).count();
    return n;
  }

  long total_cells() const {
    return static_cast<long>(channels()) * map_h * map_w;
  }
};

/// How detections are placed onto the stack.
///  kRecovery    - spatial + channel recovery from the regressed box
///  kSpatialOnly - recovered (X,Y), channel from the source anchor
///  kLegacy      - both (X,Y) and channel from the source anchor
enum class Projection { kRecovery, kSpatialOnly, kLegacy };

std::string to_string(Projection p);
Projection projection_from_string(const std::string& s);

struct CellIndex {
  int channel = 0;
  int x = 0;
  int y = 0;

  bool operator==(const CellIndex&) const = default;
};

/// Counters filled during projection; degenerate boxes (zero width or height)
/// cannot be ratio-matched and are flagged here.
struct ProjectionStats {
  long degenerate = 0;
};

/// Maps a box center to its score-map cell: floor(x_c / beta) clamped into
/// the grid.
std::pair<int, int> spatial_recover(float x_c, float y_c, float beta,
                                    int map_w, int map_h);

/// Nearest-scale / nearest-ratio channel for a w x h box: argmin |w*h - s|
/// over scales and argmin |h/w - r| over ratios, ties toward the smaller
/// entry. Degenerate boxes get the smallest scale and the ratio nearest 1.
int channel_recover(float w, float h, std::span<const float> scales,
                    std::span<const float> ratios, bool log_space = false,
                    ProjectionStats* stats = nullptr);

/// Projection used by the original MaxpoolNMS baseline: the source anchor's
/// default channel and the anchor center's cell. Throws std::invalid_argument
/// when the detection carries no source anchor.
CellIndex legacy_project(const Detection& det, const NmsConfig& config);

/// Cell for one detection under the chosen projection.
CellIndex project(const Detection& det, const NmsConfig& config,
                  Projection projection, ProjectionStats* stats = nullptr);

/// Boxes competing for one cell before score assignment.
struct CellBucket {
  std::vector<std::pair<float, int>> candidates;  // (score, det_id)
};

/// Buckets keyed by linearized (channel, y, x); std::map keeps the canonical
/// cell order for the seeded random variant.
using CellBuckets = std::map<std::int64_t, CellBucket>;

std::int64_t cell_key(const CellIndex& cell, int map_w, int map_h);

/// Empty stack sized for the config's channel grid and image.
ScoreMapStack make_stack(const NmsConfig& config);

/// Reduces buckets onto a fresh stack. max keeps the highest-scoring
/// candidate (ties toward the lowest det_id); sum stores the clamped score
/// sum under the max candidate's id; random draws one candidate per cell from
/// a generator seeded with config.seed.
ScoreMapStack assign_scores(const CellBuckets& buckets, const NmsConfig& config,
                            Assignment variant);

/// Full projection pass: every detection lands on exactly one cell, then
/// buckets are reduced via the config's assignment variant. All detections
/// must share one class; the caller partitions.
ScoreMapStack build_score_maps(std::span<const Detection> dets,
                               const NmsConfig& config, Projection projection,
                               ProjectionStats* stats = nullptr);

/// Debug dump of a stack as dense text slabs (scores then ids per channel,
/// row-major) with a header naming dimensions, scales, and ratios.
void write_stack_trace(const ScoreMapStack& stack, const std::string& path);

}  // namespace nmsforge
