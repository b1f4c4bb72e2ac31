#include "nmsforge/pool.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nmsforge/parallel.hpp"

namespace nmsforge {

KernelSpec kernel_for_channel(float scale, float ratio, float alpha, float beta) {
  const float w = std::sqrt(scale / ratio);
  const float h = std::sqrt(scale * ratio);
  const int kx = std::max(static_cast<int>(std::lround(alpha * w / beta)), 1);
  const int ky = std::max(static_cast<int>(std::lround(alpha * h / beta)), 1);
  return {kx, ky, kx, ky};
}

std::vector<KernelSpec> channel_kernels(const NmsConfig& config) {
  std::vector<KernelSpec> specs;
  specs.reserve(config.n_channels());
  for (int c = 0; c < config.n_channels(); ++c) {
    specs.push_back(kernel_for_channel(config.scales[config.scale_index_of(c)],
                                       config.ratios[config.ratio_index_of(c)],
                                       config.alpha, config.beta));
  }
  return specs;
}

KernelSpec group_kernel(std::span<const int> group,
                        std::span<const KernelSpec> per_channel) {
  KernelSpec spec = per_channel[group.front()];
  for (int c : group) {
    spec.k_x = std::min(spec.k_x, per_channel[c].k_x);
    spec.k_y = std::min(spec.k_y, per_channel[c].k_y);
    spec.s_x = std::min(spec.s_x, per_channel[c].s_x);
    spec.s_y = std::min(spec.s_y, per_channel[c].s_y);
  }
  return spec;
}

std::vector<std::vector<int>> make_groups(StageKind kind, const NmsConfig& config) {
  const int n_scales = static_cast<int>(config.scales.size());
  const int n_ratios = static_cast<int>(config.ratios.size());
  std::vector<std::vector<int>> groups;
  switch (kind) {
    case StageKind::kSingle:
      for (int c = 0; c < config.n_channels(); ++c) groups.push_back({c});
      break;
    case StageKind::kRatio:
      for (int s = 0; s < n_scales; ++s) {
        std::vector<int> g;
        for (int r = 0; r < n_ratios; ++r) g.push_back(config.channel_index(s, r));
        groups.push_back(std::move(g));
      }
      break;
    case StageKind::kScale:
      // adjacent-scale pairs per ratio; ascending scale so overlapping pairs
      // chain deterministically
      for (int r = 0; r < n_ratios; ++r) {
        for (int s = 0; s + 1 < n_scales; ++s) {
          groups.push_back(
              {config.channel_index(s, r), config.channel_index(s + 1, r)});
        }
        if (n_scales == 1) groups.push_back({config.channel_index(0, r)});
      }
      break;
    case StageKind::kAll: {
      std::vector<int> g(config.n_channels());
      for (int c = 0; c < config.n_channels(); ++c) g[c] = c;
      groups.push_back(std::move(g));
      break;
    }
  }
  return groups;
}

void pool_keep_inplace(ScoreMapStack& stack, std::span<const int> group,
                       const KernelSpec& spec, int shift_x, int shift_y) {
  std::vector<int> channels(group.begin(), group.end());
  std::sort(channels.begin(), channels.end());
  if (channels.empty() || channels.front() < 0 ||
      channels.back() >= stack.channels()) {
    throw std::invalid_argument("pool_keep: channel group out of range");
  }

  const int h = stack.map_h;
  const int w = stack.map_w;
  for (int y0 = -shift_y; y0 < h; y0 += spec.s_y) {
    const int wy0 = std::max(y0, 0);
    const int wy1 = std::min(y0 + spec.k_y - 1, h - 1);
    if (wy1 < wy0) continue;
    for (int x0 = -shift_x; x0 < w; x0 += spec.s_x) {
      const int wx0 = std::max(x0, 0);
      const int wx1 = std::min(x0 + spec.k_x - 1, w - 1);
      if (wx1 < wx0) continue;

      // window argmax over full group depth; first (c,y,x) wins ties
      int best_c = -1, best_y = 0, best_x = 0;
      float best_score = 0.0f;
      for (int c : channels) {
        for (int y = wy0; y <= wy1; ++y) {
          for (int x = wx0; x <= wx1; ++x) {
            if (stack.cell_empty(c, y, x)) continue;
            const float s = stack.score[c](y, x);
            if (best_c < 0 || s > best_score) {
              best_c = c;
              best_y = y;
              best_x = x;
              best_score = s;
            }
          }
        }
      }
      if (best_c < 0) continue;

      for (int c : channels) {
        for (int y = wy0; y <= wy1; ++y) {
          for (int x = wx0; x <= wx1; ++x) {
            if (c == best_c && y == best_y && x == best_x) continue;
            if (!stack.cell_empty(c, y, x)) stack.clear_cell(c, y, x);
          }
        }
      }
    }
  }
}

ScoreMapStack pool_keep(ScoreMapStack stack, std::span<const int> group,
                        const KernelSpec& spec, int shift_x, int shift_y) {
  pool_keep_inplace(stack, group, spec, shift_x, shift_y);
  return stack;
}

namespace {

void run_group(ScoreMapStack& stack, std::span<const int> group,
               const KernelSpec& spec, bool shifted) {
  pool_keep_inplace(stack, group, spec, 0, 0);
  if (shifted) {
    pool_keep_inplace(stack, group, spec, spec.k_x / 2, spec.k_y / 2);
  }
}

}  // namespace

ScoreMapStack run_stage(ScoreMapStack stack, const PoolStage& stage,
                        const NmsConfig& config) {
  const auto groups = stage.channel_groups.empty()
                          ? make_groups(stage.kind, config)
                          : stage.channel_groups;
  const auto kernels = channel_kernels(config);

  if (stage.kind == StageKind::kScale) {
    // overlapping pairs of one ratio must chain in order; distinct ratios are
    // independent
    const int n_ratios = static_cast<int>(config.ratios.size());
    std::vector<std::vector<const std::vector<int>*>> chains(n_ratios);
    for (const auto& g : groups) {
      chains[config.ratio_index_of(g.front())].push_back(&g);
    }
    parallel_for(chains.size(), config.parallel, [&](std::size_t r) {
      for (const auto* g : chains[r]) {
        run_group(stack, *g, group_kernel(*g, kernels), stage.shifted);
      }
    });
  } else {
    parallel_for(groups.size(), config.parallel, [&](std::size_t i) {
      run_group(stack, groups[i], group_kernel(groups[i], kernels),
                stage.shifted);
    });
  }
  return stack;
}

ScoreMapStack pyramid_run(ScoreMapStack stack,
                          std::span<const PoolStage> schedule,
                          const NmsConfig& config, PyramidTrace* trace) {
  if (trace != nullptr) {
    trace->initial_non_empty = stack.non_empty();
    trace->stages.clear();
  }
  for (const PoolStage& stage : schedule) {
    stack = run_stage(std::move(stack), stage, config);
    if (trace != nullptr) {
      trace->stages.push_back({stage.kind, stage.shifted, stack.non_empty()});
    }
  }
  return stack;
}

KeptSet collect_survivors(const ScoreMapStack& stack, int top_k) {
  std::vector<std::pair<float, int>> cells;
  for (int c = 0; c < stack.channels(); ++c) {
    for (int y = 0; y < stack.map_h; ++y) {
      for (int x = 0; x < stack.map_w; ++x) {
        if (!stack.cell_empty(c, y, x)) {
          cells.push_back({stack.score[c](y, x), stack.id[c](y, x)});
        }
      }
    }
  }
  std::sort(cells.begin(), cells.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  if (top_k >= 0 && cells.size() > static_cast<std::size_t>(top_k)) {
    cells.resize(top_k);
  }
  KeptSet kept;
  kept.ids.reserve(cells.size());
  for (const auto& [_, id] : cells) kept.ids.push_back(id);
  return kept;
}

KeptSet psrr_nms(std::span<const Detection> dets, const NmsConfig& config,
                 PyramidTrace* trace, ProjectionStats* stats) {
  ScoreMapStack stack =
      build_score_maps(dets, config, Projection::kRecovery, stats);
  stack = pyramid_run(std::move(stack), config.schedule, config, trace);
  return collect_survivors(stack, config.top_k);
}

std::string to_string(LegacyVariant v) {
  switch (v) {
    case LegacyVariant::kSingle: return "single";
    case LegacyVariant::kRatio: return "ratio";
    case LegacyVariant::kScale: return "scale";
  }
  return "single";
}

KeptSet maxpoolnms_legacy(std::span<const Detection> dets,
                          const NmsConfig& config, LegacyVariant variant,
                          PyramidTrace* trace) {
  ScoreMapStack stack = build_score_maps(dets, config, Projection::kLegacy);
  PoolStage stage;
  stage.shifted = false;
  switch (variant) {
    case LegacyVariant::kSingle: stage.kind = StageKind::kSingle; break;
    case LegacyVariant::kRatio: stage.kind = StageKind::kRatio; break;
    case LegacyVariant::kScale: stage.kind = StageKind::kScale; break;
  }
  if (trace != nullptr) trace->initial_non_empty = stack.non_empty();
  stack = run_stage(std::move(stack), stage, config);
  if (trace != nullptr) {
    trace->stages.push_back({stage.kind, stage.shifted, stack.non_empty()});
  }
  return collect_survivors(stack, config.top_k);
}

}  // namespace nmsforge
