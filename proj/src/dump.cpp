#include "nmsforge/dump.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace nmsforge {

namespace {

using nlohmann::json;

[[noreturn]] void fail(std::size_t line_no, const std::string& what) {
  throw std::runtime_error("dump parse error at line " +
                           std::to_string(line_no) + ": " + what);
}

double finite_number(const json& obj, const char* field, std::size_t line_no) {
  if (!obj.contains(field)) fail(line_no, std::string("missing field '") + field + "'");
  const json& v = obj.at(field);
  if (!v.is_number()) fail(line_no, std::string("field '") + field + "' is not a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) fail(line_no, std::string("field '") + field + "' is not finite");
  return d;
}

BoundingBox parse_box(const json& obj, std::size_t line_no) {
  BoundingBox b;
  b.x1 = static_cast<float>(finite_number(obj, "x1", line_no));
  b.y1 = static_cast<float>(finite_number(obj, "y1", line_no));
  b.x2 = static_cast<float>(finite_number(obj, "x2", line_no));
  b.y2 = static_cast<float>(finite_number(obj, "y2", line_no));
  return b;
}

json box_to_json(const BoundingBox& b) {
  return json{{"x1", b.x1}, {"y1", b.y1}, {"x2", b.x2}, {"y2", b.y2}};
}

}  // namespace

DetectionDump read_dump(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dump file: " + path);

  DetectionDump dump;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;

    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      fail(line_no, e.what());
    }
    if (!obj.is_object()) fail(line_no, "expected a JSON object");

    if (!header_seen) {
      if (!obj.contains("format") || obj.at("format") != "nmsdump") {
        fail(line_no, "missing nmsdump header line");
      }
      if (!obj.contains("version") || obj.at("version") != kDumpVersion) {
        fail(line_no, "unsupported dump version");
      }
      header_seen = true;
      continue;
    }

    ImageRecord rec;
    if (!obj.contains("image_id")) fail(line_no, "missing field 'image_id'");
    const json& id = obj.at("image_id");
    rec.image_id = id.is_string() ? id.get<std::string>() : id.dump();
    rec.width = static_cast<float>(finite_number(obj, "w", line_no));
    rec.height = static_cast<float>(finite_number(obj, "h", line_no));
    if (rec.width <= 0.0f || rec.height <= 0.0f) {
      fail(line_no, "image dimensions must be positive");
    }

    if (obj.contains("dets")) {
      const json& dets = obj.at("dets");
      if (!dets.is_array()) fail(line_no, "field 'dets' is not an array");
      int next_id = 0;
      for (const json& dj : dets) {
        Detection d;
        d.box = parse_box(dj, line_no);
        d.score = static_cast<float>(finite_number(dj, "score", line_no));
        if (d.score < 0.0f || d.score > 1.0f) {
          fail(line_no, "field 'score' out of range [0,1]");
        }
        d.class_id = static_cast<int>(finite_number(dj, "class", line_no));
        d.det_id = next_id++;
        if (dj.contains("src")) {
          SourceAnchor src;
          src.box = parse_box(dj.at("src"), line_no);
          src.channel =
              static_cast<int>(finite_number(dj.at("src"), "channel", line_no));
          if (src.channel < 0) fail(line_no, "field 'channel' must be >= 0");
          d.source = src;
        }
        rec.dets.push_back(std::move(d));
      }
    }

    if (obj.contains("gt")) {
      const json& gts = obj.at("gt");
      if (!gts.is_array()) fail(line_no, "field 'gt' is not an array");
      for (const json& gj : gts) {
        GroundTruthBox g;
        g.box = parse_box(gj, line_no);
        g.class_id = static_cast<int>(finite_number(gj, "class", line_no));
        rec.gt.push_back(g);
      }
    }
    dump.images.push_back(std::move(rec));
  }
  return dump;
}

void write_dump(const DetectionDump& dump, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open dump file for write: " + path);
  if (dump.images.empty()) return;  // empty dump -> empty file

  out << json{{"format", "nmsdump"}, {"version", kDumpVersion}}.dump() << "\n";
  for (const ImageRecord& rec : dump.images) {
    json dets = json::array();
    for (const Detection& d : rec.dets) {
      json dj = box_to_json(d.box);
      dj["score"] = d.score;
      dj["class"] = d.class_id;
      if (d.source.has_value()) {
        json src = box_to_json(d.source->box);
        src["channel"] = d.source->channel;
        dj["src"] = std::move(src);
      }
      dets.push_back(std::move(dj));
    }
    json obj{{"image_id", rec.image_id},
             {"w", rec.width},
             {"h", rec.height},
             {"dets", std::move(dets)}};
    if (!rec.gt.empty()) {
      json gts = json::array();
      for (const GroundTruthBox& g : rec.gt) {
        json gj = box_to_json(g.box);
        gj["class"] = g.class_id;
        gts.push_back(std::move(gj));
      }
      obj["gt"] = std::move(gts);
    }
    out << obj.dump() << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace nmsforge
