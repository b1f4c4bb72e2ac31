#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>

namespace nmsforge {

/// Axis-aligned box in image space, corner form. Coordinates are continuous
/// pixels; a normalized box satisfies x1 <= x2 and y1 <= y2.
struct BoundingBox {
  float x1 = 0.0f;
  float y1 = 0.0f;
  float x2 = 0.0f;
  float y2 = 0.0f;

  float width() const { return x2 - x1; }
  float height() const { return y2 - y1; }
  float area() const { return width() * height(); }
  float center_x() const { return 0.5f * (x1 + x2); }
  float center_y() const { return 0.5f * (y1 + y2); }

  bool operator==(const BoundingBox&) const = default;
};

/// The anchor (or proposal) a detection was regressed from, plus the score-map
/// channel that anchor lives on by construction. Needed only by the legacy
/// projection path.
struct SourceAnchor {
  BoundingBox box;
  int channel = 0;

  bool operator==(const SourceAnchor&) const = default;
};

/// One candidate box as emitted by a detector head.
struct Detection {
  BoundingBox box;              // regressed coordinates
  float score = 0.0f;           // confidence in [0,1]
  int class_id = 0;
  int det_id = 0;               // unique within an image
  std::optional<SourceAnchor> source;

  bool operator==(const Detection&) const = default;
};

struct GroundTruthBox {
  BoundingBox box;
  int class_id = 0;
};

struct CenterSize {
  float x_c = 0.0f;
  float y_c = 0.0f;
  float w = 0.0f;
  float h = 0.0f;
};

inline bool is_finite(const BoundingBox& b) {
  return std::isfinite(b.x1) && std::isfinite(b.y1) && std::isfinite(b.x2) &&
         std::isfinite(b.y2);
}

/// Reorders corners so x1 <= x2 and y1 <= y2. Throws on non-finite input.
inline BoundingBox normalize(const BoundingBox& b) {
  if (!is_finite(b)) {
    throw std::invalid_argument("normalize: non-finite box coordinate");
  }
  BoundingBox out = b;
  if (out.x1 > out.x2) std::swap(out.x1, out.x2);
  if (out.y1 > out.y2) std::swap(out.y1, out.y2);
  return out;
}

/// Reorders corners and clamps all coordinates into [0, image_w] x [0, image_h].
inline BoundingBox normalize(const BoundingBox& b, float image_w, float image_h) {
  BoundingBox out = normalize(b);
  auto clamp = [](float v, float hi) { return v < 0.0f ? 0.0f : (v > hi ? hi : v); };
  out.x1 = clamp(out.x1, image_w);
  out.x2 = clamp(out.x2, image_w);
  out.y1 = clamp(out.y1, image_h);
  out.y2 = clamp(out.y2, image_h);
  return out;
}

/// Center position and size of a normalized box.
inline CenterSize center_and_size(const BoundingBox& b) {
  return {b.center_x(), b.center_y(), b.width(), b.height()};
}

/// Intersection over union of two normalized boxes. Degenerate (zero-area)
/// boxes have IoU 0 against everything, including themselves.
inline float iou(const BoundingBox& a, const BoundingBox& b) {
  const float area_a = a.area();
  const float area_b = b.area();
  if (area_a <= 0.0f || area_b <= 0.0f) return 0.0f;
  const float ix = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const float iy = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (ix <= 0.0f || iy <= 0.0f) return 0.0f;
  const float inter = ix * iy;
  return inter / (area_a + area_b - inter);
}

}  // namespace nmsforge
