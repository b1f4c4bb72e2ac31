#pragma once

#include <string>
#include <vector>

#include "nmsforge/box.hpp"

namespace nmsforge {

/// Detections (and optional ground truth) for one image. det_ids are the
/// 0-based positions in dets and are unique within the image.
struct ImageRecord {
  std::string image_id;
  float width = 0.0f;
  float height = 0.0f;
  std::vector<Detection> dets;
  std::vector<GroundTruthBox> gt;
};

/// The canonical interchange format: one JSON object per line, preceded by a
/// versioned header line. An empty dump serializes to an empty file.
struct DetectionDump {
  std::vector<ImageRecord> images;
};

inline constexpr int kDumpVersion = 1;

/// Parses a line-delimited dump. Malformed lines raise std::runtime_error
/// naming the line number and offending field; non-finite numbers and
/// out-of-range scores are rejected.
DetectionDump read_dump(const std::string& path);

/// Deterministic serialization (sorted keys, shortest round-trip floats), so
/// write-read-write is byte-identical.
void write_dump(const DetectionDump& dump, const std::string& path);

}  // namespace nmsforge
