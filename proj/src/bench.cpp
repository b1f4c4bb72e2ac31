#include "nmsforge/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "nmsforge/parallel.hpp"

namespace nmsforge {

namespace {

using nlohmann::json;

std::string fmt_fixed(double v, int precision) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += "\"";
  return out;
}

void write_text_file(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

void check_unknown_keys(const json& obj, std::set<std::string> allowed,
                        const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) {
      throw std::invalid_argument("manifest: unknown key '" + key + "' in " +
                                  where);
    }
  }
}

}  // namespace

void RunManifest::validate() const {
  config.validate();
  if (engines.empty()) throw std::invalid_argument("run: no engines requested");
  const bool has_dump = !dump_path.empty();
  const bool has_synth = synthetic.has_value();
  if (has_dump == has_synth) {
    throw std::invalid_argument(
        "run: exactly one of a dump path or a synthetic spec is required");
  }
  if (has_synth) synthetic->validate();
  if (overlap_csv.empty())
    throw std::invalid_argument("run: overlap CSV output path is required");
  if (threads < 0) throw std::invalid_argument("run: threads must be >= 0");
  if (!(ap_iou > 0.0 && ap_iou < 1.0))
    throw std::invalid_argument("run: ap_iou must be in (0,1)");
}

void TimingRequest::validate() const {
  config.validate();
  spec.validate();
  if (n_list.empty()) throw std::invalid_argument("timing: n_list is empty");
  for (std::size_t i = 0; i < n_list.size(); ++i) {
    if (n_list[i] < 1) throw std::invalid_argument("timing: box counts must be >= 1");
    if (i > 0 && n_list[i] <= n_list[i - 1]) {
      throw std::invalid_argument("timing: n_list must be strictly ascending");
    }
  }
  if (engines.empty()) throw std::invalid_argument("timing: no engines requested");
  if (repeats < 3) throw std::invalid_argument("timing: repeats must be >= 3");
  if (warmup < 1) throw std::invalid_argument("timing: warmup must be >= 1");
  if (out_csv.empty()) throw std::invalid_argument("timing: output path is required");
}

void AblateRequest::validate() const {
  config.validate();
  static const std::set<std::string> known = {"assignment", "schedule", "shift",
                                              "recovery"};
  if (!known.count(which)) {
    throw std::invalid_argument("ablate: unknown study '" + which +
                                "' (expected assignment|schedule|shift|recovery)");
  }
  const bool has_dump = !dump_path.empty();
  const bool has_synth = synthetic.has_value();
  if (has_dump == has_synth) {
    throw std::invalid_argument(
        "ablate: exactly one of a dump path or a synthetic spec is required");
  }
  if (has_synth) synthetic->validate();
  if (out_csv.empty()) throw std::invalid_argument("ablate: output path is required");
  if (threads < 0) throw std::invalid_argument("ablate: threads must be >= 0");
}

std::vector<PoolStage> parse_schedule(const std::string& text, bool shifted) {
  std::vector<PoolStage> schedule;
  std::string token;
  std::istringstream in(text);
  while (std::getline(in, token, '+')) {
    if (token.empty()) continue;
    schedule.push_back({stage_kind_from_string(token), shifted, {}});
  }
  if (schedule.empty()) {
    throw std::invalid_argument("empty schedule: '" + text + "'");
  }
  return schedule;
}

std::string schedule_to_string(const std::vector<PoolStage>& schedule) {
  std::string out;
  for (const PoolStage& s : schedule) {
    if (!out.empty()) out += "+";
    out += to_string(s.kind);
  }
  return out;
}

namespace {

NmsConfig config_from_json(const json& j) {
  check_unknown_keys(j,
                     {"alpha", "beta", "scales", "ratios", "image_w", "image_h",
                      "top_k", "assignment", "schedule", "greedy_iou", "seed",
                      "log_space_channel_distance", "parallel"},
                     "config");
  NmsConfig c;
  if (j.contains("alpha")) c.alpha = j.at("alpha").get<float>();
  if (j.contains("beta")) c.beta = j.at("beta").get<float>();
  if (j.contains("scales")) c.scales = j.at("scales").get<std::vector<float>>();
  if (j.contains("ratios")) c.ratios = j.at("ratios").get<std::vector<float>>();
  if (j.contains("image_w")) c.image_w = j.at("image_w").get<float>();
  if (j.contains("image_h")) c.image_h = j.at("image_h").get<float>();
  if (j.contains("top_k")) c.top_k = j.at("top_k").get<int>();
  if (j.contains("assignment")) {
    c.assignment = assignment_from_string(j.at("assignment").get<std::string>());
  }
  if (j.contains("schedule")) {
    const json& sj = j.at("schedule");
    c.schedule.clear();
    if (sj.is_string()) {
      c.schedule = parse_schedule(sj.get<std::string>());
    } else {
      for (const json& stage : sj) {
        if (stage.is_string()) {
          c.schedule.push_back(
              {stage_kind_from_string(stage.get<std::string>()), true, {}});
        } else {
          check_unknown_keys(stage, {"kind", "shifted"}, "schedule stage");
          PoolStage ps;
          ps.kind = stage_kind_from_string(stage.at("kind").get<std::string>());
          if (stage.contains("shifted")) ps.shifted = stage.at("shifted").get<bool>();
          c.schedule.push_back(std::move(ps));
        }
      }
    }
  }
  if (j.contains("greedy_iou")) c.greedy_iou = j.at("greedy_iou").get<float>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("log_space_channel_distance")) {
    c.log_space_channel_distance = j.at("log_space_channel_distance").get<bool>();
  }
  if (j.contains("parallel")) c.parallel = j.at("parallel").get<bool>();
  return c;
}

SyntheticSpec synthetic_from_json(const json& j) {
  check_unknown_keys(j,
                     {"seed", "n_scenes", "boxes_per_scene", "n_clusters",
                      "image_w", "image_h", "min_area", "max_area", "min_ratio",
                      "max_ratio", "center_jitter", "size_jitter", "ratio_jitter",
                      "score_decay", "score_noise"},
                     "synthetic spec");
  SyntheticSpec s;
  if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("n_scenes")) s.n_scenes = j.at("n_scenes").get<int>();
  if (j.contains("boxes_per_scene")) s.boxes_per_scene = j.at("boxes_per_scene").get<int>();
  if (j.contains("n_clusters")) s.n_clusters = j.at("n_clusters").get<int>();
  if (j.contains("image_w")) s.image_w = j.at("image_w").get<float>();
  if (j.contains("image_h")) s.image_h = j.at("image_h").get<float>();
  if (j.contains("min_area")) s.min_area = j.at("min_area").get<float>();
  if (j.contains("max_area")) s.max_area = j.at("max_area").get<float>();
  if (j.contains("min_ratio")) s.min_ratio = j.at("min_ratio").get<float>();
  if (j.contains("max_ratio")) s.max_ratio = j.at("max_ratio").get<float>();
  if (j.contains("center_jitter")) s.center_jitter = j.at("center_jitter").get<float>();
  if (j.contains("size_jitter")) s.size_jitter = j.at("size_jitter").get<float>();
  if (j.contains("ratio_jitter")) s.ratio_jitter = j.at("ratio_jitter").get<float>();
  if (j.contains("score_decay")) s.score_decay = j.at("score_decay").get<float>();
  if (j.contains("score_noise")) s.score_noise = j.at("score_noise").get<float>();
  return s;
}

}  // namespace

void apply_env_seed(NmsConfig& config, SyntheticSpec* synthetic) {
  const char* env = std::getenv("NMSFORGE_SEED");
  if (env == nullptr || *env == '\0') return;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (end == nullptr || *end != '\0') {
    throw std::invalid_argument("NMSFORGE_SEED is not an unsigned integer");
  }
  config.seed = v;
  if (synthetic != nullptr) synthetic->seed = v;
}

RunManifest load_run_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("manifest parse error in " + path + ": " + e.what());
  }
  check_unknown_keys(j,
                     {"config", "input", "engines", "overlap_mode", "outputs",
                      "ap_iou", "ap_eleven_point", "trace", "threads"},
                     "manifest");

  RunManifest m;
  if (j.contains("config")) m.config = config_from_json(j.at("config"));
  if (j.contains("input")) {
    const json& input = j.at("input");
    check_unknown_keys(input, {"dump", "synthetic"}, "input");
    if (input.contains("dump")) m.dump_path = input.at("dump").get<std::string>();
    if (input.contains("synthetic")) {
      m.synthetic = synthetic_from_json(input.at("synthetic"));
    }
  }
  if (j.contains("engines")) {
    m.engines.clear();
    for (const json& e : j.at("engines")) {
      m.engines.push_back(engine_from_string(e.get<std::string>()));
    }
  }
  if (j.contains("overlap_mode")) {
    m.overlap_mode = overlap_mode_from_string(j.at("overlap_mode").get<std::string>());
  }
  if (j.contains("outputs")) {
    const json& out = j.at("outputs");
    check_unknown_keys(out, {"overlap_csv", "ap_csv", "trace_csv", "stack_dir"},
                       "outputs");
    if (out.contains("overlap_csv")) m.overlap_csv = out.at("overlap_csv").get<std::string>();
    if (out.contains("ap_csv")) m.ap_csv = out.at("ap_csv").get<std::string>();
    if (out.contains("trace_csv")) m.trace_csv = out.at("trace_csv").get<std::string>();
    if (out.contains("stack_dir")) m.stack_dir = out.at("stack_dir").get<std::string>();
  }
  if (j.contains("ap_iou")) m.ap_iou = j.at("ap_iou").get<double>();
  if (j.contains("ap_eleven_point")) m.ap_eleven_point = j.at("ap_eleven_point").get<bool>();
  if (j.contains("trace")) m.trace = j.at("trace").get<bool>();
  if (j.contains("threads")) m.threads = j.at("threads").get<int>();

  apply_env_seed(m.config, m.synthetic.has_value() ? &*m.synthetic : nullptr);
  return m;
}

namespace {

DetectionDump load_input(const std::string& dump_path,
                         const std::optional<SyntheticSpec>& synthetic,
                         const NmsConfig& config) {
  if (!dump_path.empty()) return read_dump(dump_path);
  return generate_synthetic(*synthetic, config);
}

void require_anchors(const DetectionDump& dump, const std::string& who) {
  for (const ImageRecord& rec : dump.images) {
    for (const Detection& d : rec.dets) {
      if (!d.source.has_value()) {
        throw std::invalid_argument(
            who + " requires source anchors on every detection; image '" +
            rec.image_id + "' det " + std::to_string(d.det_id) +
            " has none (legacy projection needs anchor metadata)");
      }
    }
  }
}

NmsConfig config_for_image(const NmsConfig& base, const ImageRecord& rec) {
  NmsConfig cfg = base;
  cfg.image_w = rec.width;
  cfg.image_h = rec.height;
  return cfg;
}

std::map<int, std::vector<Detection>> partition_by_class(
    const std::vector<Detection>& dets) {
  std::map<int, std::vector<Detection>> by_class;
  for (const Detection& d : dets) by_class[d.class_id].push_back(d);
  return by_class;
}

std::vector<Detection> kept_detections(const std::vector<Detection>& dets,
                                       const KeptSet& kept) {
  std::map<int, const Detection*> by_id;
  for (const Detection& d : dets) by_id[d.det_id] = &d;
  std::vector<Detection> out;
  out.reserve(kept.ids.size());
  for (int id : kept.ids) out.push_back(*by_id.at(id));
  return out;
}

std::string sanitize_id(const std::string& id) {
  std::string out = id;
  for (char& c : out) {
    if (c == '/' || c == '\\' || c == ':' || c == ' ') c = '_';
  }
  return out;
}

std::string make_run_id() {
  const auto now = std::chrono::system_clock::now().time_since_epoch();
  const auto us = std::chrono::duration_cast<std::chrono::microseconds>(now);
  std::ostringstream os;
  os << std::hex << us.count();
  return os.str();
}

/// Per-class AP rows plus the mAP summary row; warns about detection classes
/// that have no ground truth.
std::string ap_csv_rows(const std::string& engine_label,
                        const std::vector<std::vector<Detection>>& kept_per_image,
                        const std::vector<std::vector<GroundTruthBox>>& gt_per_image,
                        double ap_iou, bool eleven_point) {
  std::set<int> det_classes, gt_classes;
  for (const auto& dets : kept_per_image) {
    for (const auto& d : dets) det_classes.insert(d.class_id);
  }
  for (const auto& gts : gt_per_image) {
    for (const auto& g : gts) gt_classes.insert(g.class_id);
  }
  for (int cls : det_classes) {
    if (!gt_classes.count(cls)) {
      std::cerr << "warning: class " << cls
                << " has detections but no ground truth; excluded from mAP\n";
    }
  }
  const auto results = voc_ap(kept_per_image, gt_per_image, ap_iou, eleven_point);
  std::ostringstream os;
  int total_gt = 0;
  for (const ApResult& r : results) {
    os << kCsvSchemaVersion << "," << engine_label << "," << r.class_id << ","
       << r.n_gt << "," << fmt_fixed(r.ap, 6) << "\n";
    total_gt += r.n_gt;
  }
  os << kCsvSchemaVersion << "," << engine_label << ",all," << total_gt << ","
     << fmt_fixed(mean_ap(results), 6) << "\n";
  return os.str();
}

std::optional<ScoreMapStack> final_stack(EngineKind engine,
                                         std::span<const Detection> dets,
                                         const NmsConfig& cfg) {
  switch (engine) {
    case EngineKind::kGreedy:
      return std::nullopt;
    case EngineKind::kPsrr: {
      ScoreMapStack stack = build_score_maps(dets, cfg, Projection::kRecovery);
      return pyramid_run(std::move(stack), cfg.schedule, cfg, nullptr);
    }
    default: {
      ScoreMapStack stack = build_score_maps(dets, cfg, Projection::kLegacy);
      PoolStage stage;
      stage.shifted = false;
      stage.kind = engine == EngineKind::kLegacyRatio  ? StageKind::kRatio
                   : engine == EngineKind::kLegacyScale ? StageKind::kScale
                                                        : StageKind::kSingle;
      return run_stage(std::move(stack), stage, cfg);
    }
  }
}

}  // namespace

void cmd_run(const RunManifest& manifest) {
  manifest.validate();
  const DetectionDump dump =
      load_input(manifest.dump_path, manifest.synthetic, manifest.config);

  for (EngineKind e : manifest.engines) {
    if (engine_needs_anchors(e)) {
      require_anchors(dump, "engine '" + to_string(e) + "'");
      break;
    }
  }

  const std::size_t n_images = dump.images.size();
  struct PerImage {
    std::string overlap_rows;
    std::string trace_rows;
    std::map<EngineKind, std::vector<Detection>> kept;
  };
  std::vector<PerImage> slots(n_images);

  parallel_for(n_images, manifest.threads != 1, [&](std::size_t i) {
    const ImageRecord& rec = dump.images[i];
    const NmsConfig cfg = config_for_image(manifest.config, rec);
    const long total_cells =
        static_cast<long>(cfg.n_channels()) * cfg.map_w() * cfg.map_h();
    std::ostringstream rows, trace_rows;

    for (const auto& [cls, cdets] : partition_by_class(rec.dets)) {
      const KeptSet oracle = greedy_nms(cdets, cfg.greedy_iou, cfg.top_k);
      for (EngineKind engine : manifest.engines) {
        EngineRun run;
        if (engine == EngineKind::kGreedy) {
          run.kept = oracle;
        } else {
          run = run_engine(engine, cdets, cfg);
        }
        const OverlapReport rep =
            overlap_ratio(run.kept, oracle, manifest.overlap_mode);

        rows << kCsvSchemaVersion << "," << csv_escape(rec.image_id) << ","
             << cls << "," << to_string(engine) << "," << cdets.size() << ","
             << rep.n_approx << "," << rep.n_greedy << "," << rep.n_common
             << "," << fmt_fixed(rep.ratio, 6) << ",";
        if (run.has_trace) {
          const double s0 =
              static_cast<double>(run.trace.initial_non_empty) / total_cells;
          const double s1 = run.trace.stages.empty()
                                ? s0
                                : static_cast<double>(
                                      run.trace.stages.back().non_empty) /
                                      total_cells;
          rows << fmt_fixed(s0, 6) << "," << fmt_fixed(s1, 6);
        } else {
          rows << ",";
        }
        rows << "\n";

        if (manifest.trace && run.has_trace) {
          trace_rows << kCsvSchemaVersion << "," << csv_escape(rec.image_id)
                     << "," << cls << "," << to_string(engine)
                     << ",0,initial,0," << run.trace.initial_non_empty << ","
                     << total_cells << "\n";
          int stage_idx = 1;
          for (const StageTraceEntry& st : run.trace.stages) {
            trace_rows << kCsvSchemaVersion << "," << csv_escape(rec.image_id)
                       << "," << cls << "," << to_string(engine) << ","
                       << stage_idx++ << "," << to_string(st.kind) << ","
                       << (st.shifted ? 1 : 0) << "," << st.non_empty << ","
                       << total_cells << "\n";
          }
        }

        if (!manifest.ap_csv.empty()) {
          auto kd = kept_detections(cdets, run.kept);
          auto& dst = slots[i].kept[engine];
          dst.insert(dst.end(), kd.begin(), kd.end());
        }

        if (!manifest.stack_dir.empty()) {
          const auto stack = final_stack(engine, cdets, cfg);
          if (stack.has_value()) {
            const std::string name = sanitize_id(rec.image_id) + "_c" +
                                     std::to_string(cls) + "_" +
                                     to_string(engine) + ".txt";
            std::filesystem::create_directories(manifest.stack_dir);
            write_stack_trace(*stack,
                              (std::filesystem::path(manifest.stack_dir) / name)
                                  .string());
          }
        }
      }
    }
    slots[i].overlap_rows = rows.str();
    slots[i].trace_rows = trace_rows.str();
  });

  std::string overlap_out(kOverlapCsvHeader);
  overlap_out += "\n";
  for (const PerImage& s : slots) overlap_out += s.overlap_rows;
  write_text_file(manifest.overlap_csv, overlap_out);

  if (manifest.trace) {
    std::string trace_out(kTraceCsvHeader);
    trace_out += "\n";
    for (const PerImage& s : slots) trace_out += s.trace_rows;
    const std::string path = manifest.trace_csv.empty()
                                 ? manifest.overlap_csv + ".trace.csv"
                                 : manifest.trace_csv;
    write_text_file(path, trace_out);
  }

  if (!manifest.ap_csv.empty()) {
    std::vector<std::vector<GroundTruthBox>> gt_per_image;
    gt_per_image.reserve(n_images);
    bool any_gt = false;
    for (const ImageRecord& rec : dump.images) {
      gt_per_image.push_back(rec.gt);
      any_gt = any_gt || !rec.gt.empty();
    }
    std::string ap_out(kApCsvHeader);
    ap_out += "\n";
    if (any_gt) {
      for (EngineKind engine : manifest.engines) {
        std::vector<std::vector<Detection>> kept_per_image(n_images);
        for (std::size_t i = 0; i < n_images; ++i) {
          auto it = slots[i].kept.find(engine);
          if (it != slots[i].kept.end()) kept_per_image[i] = it->second;
        }
        ap_out += ap_csv_rows(to_string(engine), kept_per_image, gt_per_image,
                              manifest.ap_iou, manifest.ap_eleven_point);
      }
    } else {
      std::cerr << "warning: AP requested but the input has no ground truth\n";
    }
    write_text_file(manifest.ap_csv, ap_out);
  }
}

void cmd_timing(const TimingRequest& request) {
  request.validate();
  const std::string run_id = make_run_id();

  // template density: boxes per cluster stays constant as N grows
  const int boxes_per_cluster =
      std::max(1, request.spec.boxes_per_scene / std::max(1, request.spec.n_clusters));

  std::ostringstream out;
  out << kTimingCsvHeader << "\n";
  for (int n : request.n_list) {
    SyntheticSpec spec = request.spec;
    spec.n_scenes = 1;
    spec.boxes_per_scene = n;
    spec.n_clusters = std::max(1, n / boxes_per_cluster);

    NmsConfig cfg = request.config;
    cfg.image_w = spec.image_w;
    cfg.image_h = spec.image_h;
    cfg.top_k = n;  // sweep is uncapped so cost reflects the full input
    cfg.parallel = request.parallel_engines;

    const DetectionDump dump = generate_synthetic(spec, cfg);
    const std::vector<Detection>& dets = dump.images.front().dets;

    for (EngineKind engine : request.engines) {
      const TimingStats stats =
          time_engine(engine, dets, cfg, request.repeats, request.warmup);
      for (std::size_t r = 0; r < stats.samples_ms.size(); ++r) {
        out << kCsvSchemaVersion << "," << run_id << "," << to_string(engine)
            << "," << n << "," << r << "," << fmt_fixed(stats.samples_ms[r], 4)
            << ",";
        if (stats.has_phases) {
          out << fmt_fixed(stats.recovery_ms[r], 4) << ","
              << fmt_fixed(stats.pool_ms[r], 4);
        } else {
          out << ",";
        }
        out << "\n";
      }
    }
  }
  write_text_file(request.out_csv, out.str());
}

namespace {

using VariantRunner =
    std::function<KeptSet(std::span<const Detection>, const NmsConfig&)>;

struct VariantDef {
  std::string name;
  VariantRunner run;
};

std::vector<VariantDef> ablation_variants(const std::string& which,
                                          const NmsConfig& base) {
  std::vector<VariantDef> defs;
  if (which == "assignment") {
    for (Assignment a : {Assignment::kRandom, Assignment::kSum, Assignment::kMax}) {
      defs.push_back({to_string(a), [a](std::span<const Detection> dets,
                                        const NmsConfig& cfg) {
                        NmsConfig c = cfg;
                        c.assignment = a;
                        return psrr_nms(dets, c);
                      }});
    }
  } else if (which == "schedule") {
    const std::vector<std::string> schedules = {
        "single",
        "ratio",
        "scale",
        "all",
        "single+ratio",
        "ratio+single",
        "single+ratio+all",
        "all+ratio+single",
        "single+ratio+scale+all",
        "all+scale+ratio+single",
    };
    for (const std::string& s : schedules) {
      defs.push_back({s, [s](std::span<const Detection> dets,
                             const NmsConfig& cfg) {
                        NmsConfig c = cfg;
                        c.schedule = parse_schedule(s);
                        return psrr_nms(dets, c);
                      }});
    }
  } else if (which == "shift") {
    for (bool shifted : {false, true}) {
      defs.push_back({shifted ? "with-shift" : "without-shift",
                      [shifted](std::span<const Detection> dets,
                                const NmsConfig& cfg) {
                        NmsConfig c = cfg;
                        for (PoolStage& st : c.schedule) st.shifted = shifted;
                        return psrr_nms(dets, c);
                      }});
    }
  } else {  // recovery
    const std::vector<Projection> projections = {
        Projection::kLegacy, Projection::kSpatialOnly, Projection::kRecovery};
    for (Projection p : projections) {
      for (StageKind k : {StageKind::kSingle, StageKind::kRatio,
                          StageKind::kScale, StageKind::kAll}) {
        const std::string name = to_string(p) + ":" + to_string(k);
        defs.push_back({name, [p, k](std::span<const Detection> dets,
                                     const NmsConfig& cfg) {
                          ScoreMapStack stack = build_score_maps(dets, cfg, p);
                          PoolStage stage;
                          stage.kind = k;
                          stage.shifted = false;
                          stack = run_stage(std::move(stack), stage, cfg);
                          return collect_survivors(stack, cfg.top_k);
                        }});
      }
    }
  }
  (void)base;
  return defs;
}

}  // namespace

void cmd_ablate(const AblateRequest& request) {
  request.validate();
  const DetectionDump dump =
      load_input(request.dump_path, request.synthetic, request.config);
  if (request.which == "recovery") {
    require_anchors(dump, "ablation 'recovery'");
  }

  const std::size_t n_images = dump.images.size();

  // oracle kept sets are shared across variants
  struct SceneUnit {
    std::size_t image;
    int class_id;
    std::vector<Detection> dets;
    KeptSet oracle;
  };
  std::vector<SceneUnit> units;
  for (std::size_t i = 0; i < n_images; ++i) {
    const NmsConfig cfg = config_for_image(request.config, dump.images[i]);
    for (auto& [cls, cdets] : partition_by_class(dump.images[i].dets)) {
      SceneUnit u;
      u.image = i;
      u.class_id = cls;
      u.oracle = greedy_nms(cdets, cfg.greedy_iou, cfg.top_k);
      u.dets = std::move(cdets);
      units.push_back(std::move(u));
    }
  }

  std::vector<std::vector<GroundTruthBox>> gt_per_image;
  bool any_gt = false;
  for (const ImageRecord& rec : dump.images) {
    gt_per_image.push_back(rec.gt);
    any_gt = any_gt || !rec.gt.empty();
  }

  std::ostringstream out;
  out << kAblateCsvHeader << "\n";

  for (const VariantDef& variant : ablation_variants(request.which, request.config)) {
    std::vector<OverlapReport> reports(units.size());
    std::vector<std::vector<Detection>> kept_per_image(n_images);
    std::vector<std::vector<Detection>> kept_by_unit(units.size());

    parallel_for(units.size(), request.threads != 1, [&](std::size_t u) {
      const SceneUnit& unit = units[u];
      const NmsConfig cfg =
          config_for_image(request.config, dump.images[unit.image]);
      const KeptSet kept = variant.run(unit.dets, cfg);
      reports[u] = overlap_ratio(kept, unit.oracle, request.overlap_mode);
      if (any_gt) kept_by_unit[u] = kept_detections(unit.dets, kept);
    });

    double sum_overlap = 0.0, sum_kept = 0.0, sum_oracle = 0.0;
    for (const OverlapReport& r : reports) {
      sum_overlap += r.ratio;
      sum_kept += r.n_approx;
      sum_oracle += r.n_greedy;
    }
    const double n = units.empty() ? 1.0 : static_cast<double>(units.size());

    out << kCsvSchemaVersion << "," << request.which << "," << variant.name
        << "," << units.size() << "," << fmt_fixed(sum_overlap / n, 6) << ","
        << fmt_fixed(sum_kept / n, 2) << "," << fmt_fixed(sum_oracle / n, 2)
        << ",";
    if (any_gt) {
      for (std::size_t u = 0; u < units.size(); ++u) {
        auto& dst = kept_per_image[units[u].image];
        dst.insert(dst.end(), kept_by_unit[u].begin(), kept_by_unit[u].end());
      }
      const auto results = voc_ap(kept_per_image, gt_per_image, request.ap_iou);
      out << fmt_fixed(mean_ap(results), 6);
    }
    out << "\n";
  }
  write_text_file(request.out_csv, out.str());
}

}  // namespace nmsforge
