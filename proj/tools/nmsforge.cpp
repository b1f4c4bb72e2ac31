#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nmsforge/bench.hpp"
#include "nmsforge/dump.hpp"
#include "nmsforge/synthetic.hpp"

namespace {

using namespace nmsforge;

std::vector<EngineKind> parse_engines(const std::string& csv) {
  std::vector<EngineKind> engines;
  std::string token;
  std::istringstream in(csv);
  while (std::getline(in, token, ',')) {
    if (!token.empty()) engines.push_back(engine_from_string(token));
  }
  if (engines.empty()) throw std::invalid_argument("no engines given");
  return engines;
}

// Synthetic-spec flags shared by run/ablate/timing/gen. Values land in the
// target spec only for options actually given, so they stack on top of a
// manifest.
struct SynthFlags {
  SyntheticSpec values;
  bool requested = false;
  std::vector<std::function<void(SyntheticSpec&, const SyntheticSpec&)>> appliers;

  template <typename T>
  void add(CLI::App* cmd, const char* name, T SyntheticSpec::* field,
           const char* help) {
    CLI::Option* o = cmd->add_option(name, values.*field, help);
    appliers.push_back([o, field](SyntheticSpec& dst, const SyntheticSpec& src) {
      if (o->count() > 0) dst.*field = src.*field;
    });
  }

  void attach(CLI::App* cmd) {
    cmd->add_flag("--synthetic", requested,
                  "generate input scenes instead of reading a dump");
    add(cmd, "--seed", &SyntheticSpec::seed, "generator seed");
    add(cmd, "--scenes", &SyntheticSpec::n_scenes, "number of scenes");
    add(cmd, "--boxes", &SyntheticSpec::boxes_per_scene, "boxes per scene");
    add(cmd, "--clusters", &SyntheticSpec::n_clusters, "clusters per scene");
    add(cmd, "--image-w", &SyntheticSpec::image_w, "scene width in pixels");
    add(cmd, "--image-h", &SyntheticSpec::image_h, "scene height in pixels");
    add(cmd, "--min-area", &SyntheticSpec::min_area, "smallest latent box area");
    add(cmd, "--max-area", &SyntheticSpec::max_area, "largest latent box area");
    add(cmd, "--center-jitter", &SyntheticSpec::center_jitter,
        "center offset sigma (fraction of box side)");
    add(cmd, "--size-jitter", &SyntheticSpec::size_jitter, "log-size sigma");
    add(cmd, "--ratio-jitter", &SyntheticSpec::ratio_jitter, "log-ratio sigma");
    add(cmd, "--score-noise", &SyntheticSpec::score_noise, "score noise sigma");
    add(cmd, "--score-decay", &SyntheticSpec::score_decay,
        "score drop per unit of distance from the latent box");
  }

  void apply(SyntheticSpec& spec) const {
    for (const auto& f : appliers) f(spec, values);
  }
};

// Engine-config flags; same override-only-when-given behavior.
struct ConfigFlags {
  NmsConfig values;
  std::string schedule;
  std::string assignment;
  std::vector<std::function<void(NmsConfig&, const NmsConfig&)>> appliers;

  template <typename T>
  void add(CLI::App* cmd, const char* name, T NmsConfig::* field,
           const char* help) {
    CLI::Option* o = cmd->add_option(name, values.*field, help);
    appliers.push_back([o, field](NmsConfig& dst, const NmsConfig& src) {
      if (o->count() > 0) dst.*field = src.*field;
    });
  }

  void attach(CLI::App* cmd) {
    add(cmd, "--alpha", &NmsConfig::alpha, "pooling overlap threshold");
    add(cmd, "--beta", &NmsConfig::beta, "down-sampling ratio");
    add(cmd, "--top-k", &NmsConfig::top_k, "max detections kept per class");
    add(cmd, "--greedy-iou", &NmsConfig::greedy_iou,
        "greedy oracle IoU threshold");
    cmd->add_option("--schedule", schedule,
                    "pyramid stages, e.g. single+ratio+scale+all");
    cmd->add_option("--assignment", assignment,
                    "score assignment: max|sum|random");
    CLI::Option* par = cmd->add_flag("--parallel", values.parallel,
                                     "enable engine-internal parallelism");
    appliers.push_back([par](NmsConfig& dst, const NmsConfig& src) {
      if (par->count() > 0) dst.parallel = src.parallel;
    });
  }

  void apply(NmsConfig& cfg) const {
    for (const auto& f : appliers) f(cfg, values);
    if (!schedule.empty()) cfg.schedule = parse_schedule(schedule);
    if (!assignment.empty()) cfg.assignment = assignment_from_string(assignment);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "nmsforge: greedy, maxpool, and PSRR non-maximum suppression benchmark"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand(
      "run", "run engines and measure overlap vs. the greedy oracle");
  auto* timing =
      app.add_subcommand("timing", "execution-time sweep over box counts");
  auto* ablate = app.add_subcommand("ablate", "configuration-grid studies");
  auto* gen = app.add_subcommand("gen", "generate a synthetic detection dump");

  // run
  std::string run_manifest_path, run_input, run_engines, run_mode, run_out,
      run_ap_out, run_trace_out, run_stack_dir;
  bool run_trace = false;
  int run_threads = -1;
  SynthFlags run_synth;
  ConfigFlags run_cfg;
  run->add_option("--manifest", run_manifest_path, "JSON run manifest");
  run->add_option("--input", run_input, "detection dump (JSON lines)");
  run->add_option("--engines", run_engines,
                  "comma list: greedy,psrr,legacy-single,legacy-ratio,legacy-scale");
  run->add_option("--out", run_out, "overlap CSV path");
  run->add_option("--ap-out", run_ap_out, "AP CSV path (needs ground truth)");
  run->add_flag("--trace", run_trace, "emit per-stage sparsity trace CSV");
  run->add_option("--trace-out", run_trace_out, "trace CSV path");
  run->add_option("--stack-dir", run_stack_dir,
                  "directory for final score-map dumps");
  run->add_option("--mode", run_mode, "overlap mode: jaccard|recall");
  run->add_option("--threads", run_threads, "worker threads (1 = sequential)");
  run_synth.attach(run);
  run_cfg.attach(run);

  // timing
  TimingRequest timing_req;
  std::string timing_n, timing_engines;
  SynthFlags timing_synth;
  ConfigFlags timing_cfg;
  timing->add_option("--n", timing_n, "comma list of box counts, ascending")
      ->required();
  timing->add_option("--engines", timing_engines, "engines to time");
  timing->add_option("--repeats", timing_req.repeats, "timed repeats per point");
  timing->add_option("--warmup", timing_req.warmup, "discarded warmup runs");
  timing->add_option("--out", timing_req.out_csv, "timing CSV path")->required();
  timing->add_flag("--parallel-engines", timing_req.parallel_engines,
                   "time engines with internal parallelism enabled");
  timing_synth.attach(timing);
  timing_cfg.attach(timing);

  // ablate
  AblateRequest ablate_req;
  std::string ablate_input, ablate_mode;
  SynthFlags ablate_synth;
  ConfigFlags ablate_cfg;
  ablate->add_option("--which", ablate_req.which,
                     "assignment|schedule|shift|recovery")
      ->required();
  ablate->add_option("--input", ablate_input, "detection dump (JSON lines)");
  ablate->add_option("--out", ablate_req.out_csv, "ablation CSV path")
      ->required();
  ablate->add_option("--mode", ablate_mode, "overlap mode: jaccard|recall");
  ablate->add_option("--threads", ablate_req.threads, "worker threads");
  ablate_synth.attach(ablate);
  ablate_cfg.attach(ablate);

  // gen
  std::string gen_out;
  SynthFlags gen_synth;
  gen->add_option("--out", gen_out, "dump output path")->required();
  gen_synth.attach(gen);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      RunManifest m;
      if (!run_manifest_path.empty()) m = load_run_manifest(run_manifest_path);
      // flags override the manifest
      if (!run_input.empty()) {
        m.dump_path = run_input;
        m.synthetic.reset();
      }
      if (run_synth.requested && !m.synthetic.has_value()) {
        m.synthetic = SyntheticSpec{};
        m.dump_path.clear();
      }
      if (m.synthetic.has_value()) run_synth.apply(*m.synthetic);
      if (!run_engines.empty()) m.engines = parse_engines(run_engines);
      if (!run_mode.empty()) m.overlap_mode = overlap_mode_from_string(run_mode);
      if (!run_out.empty()) m.overlap_csv = run_out;
      if (!run_ap_out.empty()) m.ap_csv = run_ap_out;
      if (run_trace) m.trace = true;
      if (!run_trace_out.empty()) m.trace_csv = run_trace_out;
      if (!run_stack_dir.empty()) m.stack_dir = run_stack_dir;
      if (run_threads >= 0) m.threads = run_threads;
      run_cfg.apply(m.config);
      apply_env_seed(m.config, m.synthetic.has_value() ? &*m.synthetic : nullptr);
      cmd_run(m);
    } else if (timing->parsed()) {
      std::string token;
      std::istringstream in(timing_n);
      while (std::getline(in, token, ',')) {
        if (!token.empty()) timing_req.n_list.push_back(std::stoi(token));
      }
      if (!timing_engines.empty())
        timing_req.engines = parse_engines(timing_engines);
      timing_cfg.apply(timing_req.config);
      timing_synth.apply(timing_req.spec);
      apply_env_seed(timing_req.config, &timing_req.spec);
      cmd_timing(timing_req);
    } else if (ablate->parsed()) {
      if (!ablate_input.empty()) {
        ablate_req.dump_path = ablate_input;
      } else if (ablate_synth.requested) {
        ablate_req.synthetic = SyntheticSpec{};
        ablate_synth.apply(*ablate_req.synthetic);
      }
      if (!ablate_mode.empty()) {
        ablate_req.overlap_mode = overlap_mode_from_string(ablate_mode);
      }
      ablate_cfg.apply(ablate_req.config);
      apply_env_seed(ablate_req.config, ablate_req.synthetic.has_value()
                                            ? &*ablate_req.synthetic
                                            : nullptr);
      cmd_ablate(ablate_req);
    } else if (gen->parsed()) {
      SyntheticSpec spec;
      gen_synth.apply(spec);
      NmsConfig cfg;
      apply_env_seed(cfg, &spec);
      write_dump(generate_synthetic(spec, cfg), gen_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
