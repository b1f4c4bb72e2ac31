#pragma once

#include <cstdint>

#include "nmsforge/config.hpp"
#include "nmsforge/dump.hpp"

namespace nmsforge {

/// Parameters for seeded clustered-scene generation. Each scene draws
/// n_clusters latent "true" boxes and scatters jittered candidates around
/// them, scores biased so the candidate closest to its latent box scores
/// highest. Every candidate carries a source anchor (the latent box snapped
/// to its nearest default channel) so the legacy projection is exercised,
/// and the latents are emitted as ground truth so AP is measurable.
struct SyntheticSpec {
  std::uint64_t seed = 1;
  int n_scenes = 1;
  int boxes_per_scene = 200;
  int n_clusters = 10;
  float image_w = 800.0f;
  float image_h = 800.0f;

  // latent box distribution: area log-uniform in [min_area, max_area],
  // h:w ratio log-uniform in [min_ratio, max_ratio]
  float min_area = 64.0f * 64.0f;
  float max_area = 192.0f * 192.0f;
  float min_ratio = 0.5f;
  float max_ratio = 2.0f;

  // per-box jitter: center offset sigma as a fraction of the latent side,
  // log-normal sigmas for overall size and for the h:w ratio
  float center_jitter = 0.25f;
  float size_jitter = 0.30f;
  float ratio_jitter = 0.55f;

  // score = clamp(1 - score_decay * (1 - IoU(box, latent)) + noise, 0.01, 1)
  float score_decay = 0.6f;
  float score_noise = 0.05f;

  void validate() const;
};

/// Deterministic under the spec's seed: the same spec yields a byte-identical
/// dump. The config supplies the channel grid used to snap source anchors.
DetectionDump generate_synthetic(const SyntheticSpec& spec,
                                 const NmsConfig& config = NmsConfig{});

}  // namespace nmsforge
