#include "nmsforge/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "nmsforge/score_map.hpp"

namespace nmsforge {

void SyntheticSpec::validate() const {
  if (n_scenes < 0) throw std::invalid_argument("synthetic: n_scenes must be >= 0");
  if (boxes_per_scene < 0)
    throw std::invalid_argument("synthetic: boxes_per_scene must be >= 0");
  if (n_clusters < 1) throw std::invalid_argument("synthetic: n_clusters must be >= 1");
  if (!(image_w > 0.0f && image_h > 0.0f))
    throw std::invalid_argument("synthetic: image dimensions must be positive");
  if (!(min_area > 0.0f && max_area >= min_area))
    throw std::invalid_argument("synthetic: need 0 < min_area <= max_area");
  if (!(min_ratio > 0.0f && max_ratio >= min_ratio))
    throw std::invalid_argument("synthetic: need 0 < min_ratio <= max_ratio");
  if (center_jitter < 0.0f || size_jitter < 0.0f || ratio_jitter < 0.0f ||
      score_noise < 0.0f) {
    throw std::invalid_argument("synthetic: jitter sigmas must be >= 0");
  }
}

namespace {

struct Latent {
  float cx, cy, w, h;

  BoundingBox box() const {
    return {cx - 0.5f * w, cy - 0.5f * h, cx + 0.5f * w, cy + 0.5f * h};
  }
};

float gauss(std::mt19937_64& rng, float sigma) {
  if (sigma <= 0.0f) return 0.0f;
  std::normal_distribution<float> dist(0.0f, sigma);
  return dist(rng);
}

float log_uniform(std::mt19937_64& rng, float lo, float hi) {
  if (hi <= lo) return lo;
  std::uniform_real_distribution<float> dist(std::log(lo), std::log(hi));
  return std::exp(dist(rng));
}

}  // namespace

DetectionDump generate_synthetic(const SyntheticSpec& spec,
                                 const NmsConfig& config) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);

  const float max_side = std::sqrt(spec.max_area * spec.max_ratio);
  const float margin = std::min(0.5f * max_side,
                                0.25f * std::min(spec.image_w, spec.image_h));
  const float sep =
      std::min(0.8f * std::sqrt(spec.max_area),
               0.9f * std::min(spec.image_w, spec.image_h) /
                   std::sqrt(static_cast<float>(spec.n_clusters)));

  DetectionDump dump;
  dump.images.reserve(spec.n_scenes);

  for (int scene = 0; scene < spec.n_scenes; ++scene) {
    ImageRecord rec;
    rec.image_id = "synthetic-" + std::to_string(scene);
    rec.width = spec.image_w;
    rec.height = spec.image_h;

    std::uniform_real_distribution<float> ux(margin, spec.image_w - margin);
    std::uniform_real_distribution<float> uy(margin, spec.image_h - margin);

    // cluster latents, best-effort separated
    std::vector<Latent> latents;
    for (int k = 0; k < spec.n_clusters; ++k) {
      float cx = 0.0f, cy = 0.0f;
      for (int attempt = 0; attempt < 100; ++attempt) {
        cx = ux(rng);
        cy = uy(rng);
        bool ok = true;
        for (const Latent& other : latents) {
          const float dx = cx - other.cx;
          const float dy = cy - other.cy;
          if (dx * dx + dy * dy < sep * sep) {
            ok = false;
            break;
          }
        }
        if (ok) break;
      }
      const float area = log_uniform(rng, spec.min_area, spec.max_area);
      const float ratio = log_uniform(rng, spec.min_ratio, spec.max_ratio);
      latents.push_back(
          {cx, cy, std::sqrt(area / ratio), std::sqrt(area * ratio)});
    }
    // the latent boxes are the scene's ground truth
    for (const Latent& latent : latents) {
      rec.gt.push_back({latent.box(), 0});
    }

    for (int i = 0; i < spec.boxes_per_scene; ++i) {
      const Latent& latent = latents[i % spec.n_clusters];

      float w = latent.w * std::exp(gauss(rng, spec.size_jitter));
      float h = latent.h * std::exp(gauss(rng, spec.size_jitter));
      const float rf = std::exp(gauss(rng, spec.ratio_jitter));
      w /= std::sqrt(rf);
      h *= std::sqrt(rf);
      const float cx = latent.cx + gauss(rng, spec.center_jitter * latent.w);
      const float cy = latent.cy + gauss(rng, spec.center_jitter * latent.h);

      Detection d;
      d.box = {cx - 0.5f * w, cy - 0.5f * h, cx + 0.5f * w, cy + 0.5f * h};
      const float closeness = iou(d.box, latent.box());
      d.score = std::clamp(1.0f - spec.score_decay * (1.0f - closeness) +
                               gauss(rng, spec.score_noise),
                           0.01f, 1.0f);
      d.class_id = 0;
      d.det_id = i;
      d.source = SourceAnchor{
          latent.box(), channel_recover(latent.w, latent.h, config.scales,
                                        config.ratios)};
      rec.dets.push_back(std::move(d));
    }
    dump.images.push_back(std::move(rec));
  }
  return dump;
}

}  // namespace nmsforge
