#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nmsforge/config.hpp"
#include "nmsforge/dump.hpp"
#include "nmsforge/metrics.hpp"
#include "nmsforge/synthetic.hpp"

namespace nmsforge {

// CSV schemas are versioned through the leading column; tests pin these.
inline constexpr int kCsvSchemaVersion = 1;
inline constexpr std::string_view kOverlapCsvHeader =
    "schema_version,image_id,class_id,engine,n_input,n_kept,n_oracle,"
    "n_common,overlap,sparsity_initial,sparsity_final";
inline constexpr std::string_view kApCsvHeader =
    "schema_version,engine,class_id,n_gt,ap";
inline constexpr std::string_view kTimingCsvHeader =
    "schema_version,run_id,engine,n_boxes,repeat,total_ms,recovery_ms,pool_ms";
inline constexpr std::string_view kAblateCsvHeader =
    "schema_version,ablation,variant,n_scenes,mean_overlap,mean_kept,"
    "mean_oracle,map";
inline constexpr std::string_view kTraceCsvHeader =
    "schema_version,image_id,class_id,engine,stage,stage_kind,shifted,"
    "non_empty,total_cells";

/// Everything one `run` invocation needs. Exactly one of dump_path /
/// synthetic supplies the input.
struct RunManifest {
  NmsConfig config;
  std::string dump_path;
  std::optional<SyntheticSpec> synthetic;
  std::vector<EngineKind> engines = {EngineKind::kGreedy, EngineKind::kPsrr};
  OverlapMode overlap_mode = OverlapMode::kJaccard;
  std::string overlap_csv;
  std::string ap_csv;        // AP computed when set and ground truth exists
  double ap_iou = 0.5;
  bool ap_eleven_point = false;
  bool trace = false;
  std::string trace_csv;     // defaults next to overlap_csv when trace is set
  std::string stack_dir;     // optional final-stack tensor dumps
  int threads = 0;           // 0 = hardware default, 1 = sequential

  void validate() const;
};

struct TimingRequest {
  std::vector<int> n_list;   // box counts, ascending
  std::vector<EngineKind> engines = {EngineKind::kGreedy, EngineKind::kPsrr};
  NmsConfig config;
  SyntheticSpec spec;        // template; boxes/clusters are set per N
  int repeats = 7;
  int warmup = 2;
  bool parallel_engines = false;  // timing runs engines sequentially by default
  std::string out_csv;

  void validate() const;
};

struct AblateRequest {
  std::string which;         // assignment | schedule | shift | recovery
  NmsConfig config;
  std::string dump_path;
  std::optional<SyntheticSpec> synthetic;
  OverlapMode overlap_mode = OverlapMode::kJaccard;
  double ap_iou = 0.5;
  std::string out_csv;
  int threads = 0;

  void validate() const;
};

/// Parses "single+ratio+scale+all" into a schedule, every stage shifted.
std::vector<PoolStage> parse_schedule(const std::string& text,
                                      bool shifted = true);
std::string schedule_to_string(const std::vector<PoolStage>& schedule);

/// Reads a JSON run manifest. Unknown keys are rejected; missing keys keep
/// defaults. NMSFORGE_SEED, when set, overrides both the synthetic seed and
/// config.seed.
RunManifest load_run_manifest(const std::string& path);

/// Applies the NMSFORGE_SEED environment override to an assembled manifest.
void apply_env_seed(NmsConfig& config, SyntheticSpec* synthetic);

/// Runs every engine per image per class, measures overlap against the
/// greedy oracle (and AP when ground truth is present), and writes the CSV
/// artifacts. Nothing is written if any part fails.
void cmd_run(const RunManifest& manifest);

/// Timing sweep over the requested box counts; one CSV row per
/// (engine, N, repeat) with the PSRR phase split.
void cmd_timing(const TimingRequest& request);

/// Configuration-grid studies: assignment variants, pyramid schedules,
/// shifted pooling on/off, and projection recovery modes.
void cmd_ablate(const AblateRequest& request);

}  // namespace nmsforge
