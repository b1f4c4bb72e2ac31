#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "nmsforge/score_map.hpp"

using namespace nmsforge;

namespace {

Detection det_at(float cx, float cy, float w, float h, float score, int id) {
  Detection d;
  d.box = {cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
  d.score = score;
  d.det_id = id;
  return d;
}

bool stacks_equal(const ScoreMapStack& a, const ScoreMapStack& b) {
  if (a.channels() != b.channels() || a.map_w != b.map_w || a.map_h != b.map_h)
    return false;
  for (int c = 0; c < a.channels(); ++c) {
    if (!(a.id[c] == b.id[c]).all()) return false;
    if (!(a.score[c] == b.score[c]).all()) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("spatial_recover") {
  CHECK(spatial_recover(100, 0, 16, 50, 50) == std::pair{6, 0});
  CHECK(spatial_recover(0, 0, 16, 50, 50) == std::pair{0, 0});
  // right edge clamps into the grid
  CHECK(spatial_recover(800, 800, 16, 50, 50) == std::pair{49, 49});
  CHECK(spatial_recover(4000, 10, 16, 50, 50).first == 49);
}

TEST_CASE("channel_recover nearest scale and ratio") {
  const NmsConfig cfg;
  // exact area and ratio hit: 64x64 -> scale 64^2, ratio 1 -> C(0,1)
  CHECK(channel_recover(64, 64, cfg.scales, cfg.ratios) == 1);
  // 64x128: area 8192 nearer 4096 than 16384; ratio 2 -> C(0,2)
  CHECK(channel_recover(64, 128, cfg.scales, cfg.ratios) == 2);
  // square boxes always pick ratio 1 from {0.5, 1, 2}
  for (float side : {10.0f, 100.0f, 333.0f, 700.0f}) {
    const int c = channel_recover(side, side, cfg.scales, cfg.ratios);
    CHECK(c % 3 == 1);
  }
}

TEST_CASE("channel_recover equidistant ties pick the smaller entry") {
  const NmsConfig cfg;
  // area 160*64 = 10240 is equidistant to 4096 and 16384 -> scale index 0;
  // ratio 0.4 is nearest 0.5
  CHECK(channel_recover(160, 64, cfg.scales, cfg.ratios) == 0);
  // ratio 120/160 = 0.75 is equidistant to 0.5 and 1 -> ratio index 0;
  // area 19200 is nearest 16384 -> scale index 1
  CHECK(channel_recover(160, 120, cfg.scales, cfg.ratios) == 3);
}

TEST_CASE("channel_recover optional log-space distance") {
  const NmsConfig cfg;
  // area 160x64 = 10240: raw distance prefers 4096, log distance prefers 16384
  CHECK(channel_recover(160, 64, cfg.scales, cfg.ratios, false) == 0);
  CHECK(channel_recover(160, 64, cfg.scales, cfg.ratios, true) == 3);
}

TEST_CASE("config validation") {
  NmsConfig cfg;
  CHECK_NOTHROW(cfg.validate());

  NmsConfig bad = cfg;
  bad.alpha = 0.0f;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.alpha = 1.5f;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.beta = 0.5f;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.scales = {4096, 4096};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.ratios = {2, 1};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.top_k = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.greedy_iou = 1.0f;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.schedule.clear();
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.image_w = 4;  // rounds to an empty map
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("channel_recover degenerate box") {
  const NmsConfig cfg;
  ProjectionStats stats;
  const int c = channel_recover(0, 64, cfg.scales, cfg.ratios, false, &stats);
  CHECK(c == 1);  // smallest scale, ratio nearest 1
  CHECK(stats.degenerate == 1);
}

TEST_CASE("legacy_project uses the anchor, not the regressed box") {
  const NmsConfig cfg;

  SUBCASE("anchor equals the regressed box: same cell as recovery") {
    Detection d = det_at(100, 100, 64, 64, 0.9f, 0);
    d.source = SourceAnchor{d.box, channel_recover(64, 64, cfg.scales, cfg.ratios)};
    const CellIndex legacy = legacy_project(d, cfg);
    const CellIndex recovered = project(d, cfg, Projection::kRecovery);
    CHECK(legacy == recovered);
  }

  SUBCASE("ratio mismatch: regressed 1:1 box stays on the 1:2 anchor channel") {
    // anchor 90.5x45.25 (ratio 0.5, channel 0); regression made it square
    Detection d = det_at(100, 100, 64, 64, 0.9f, 0);
    const float aw = 90.50967f, ah = 45.254834f;
    d.source = SourceAnchor{{100 - aw / 2, 100 - ah / 2, 100 + aw / 2, 100 + ah / 2},
                            channel_recover(aw, ah, cfg.scales, cfg.ratios)};
    CHECK(d.source->channel == 0);
    CHECK(legacy_project(d, cfg).channel == 0);
    CHECK(project(d, cfg, Projection::kRecovery).channel == 1);
  }

  SUBCASE("anchor center decides the cell regardless of regression") {
    Detection d = det_at(700, 700, 64, 64, 0.9f, 0);
    d.source = SourceAnchor{{0, 0, 64, 64}, 1};  // anchor center (32,32)
    const CellIndex cell = legacy_project(d, cfg);
    CHECK(cell.x == 2);
    CHECK(cell.y == 2);
  }

  SUBCASE("missing anchor raises") {
    const Detection d = det_at(100, 100, 64, 64, 0.9f, 0);
    CHECK_THROWS_AS(legacy_project(d, cfg), std::invalid_argument);
    CHECK_THROWS_AS(project(d, cfg, Projection::kLegacy), std::invalid_argument);
    CHECK_THROWS_AS(project(d, cfg, Projection::kSpatialOnly),
                    std::invalid_argument);
  }
}

TEST_CASE("spatial-only projection recovers the cell but keeps the anchor channel") {
  const NmsConfig cfg;
  Detection d = det_at(400, 400, 64, 64, 0.9f, 0);
  d.source = SourceAnchor{{0, 0, 90, 45}, 0};
  const CellIndex cell = project(d, cfg, Projection::kSpatialOnly);
  CHECK(cell.channel == 0);                      // anchor channel
  CHECK(cell.x == 25);                           // regressed center cell
  CHECK(cell.y == 25);
}

TEST_CASE("assign_scores variants") {
  NmsConfig cfg;
  const CellIndex cell{1, 4, 7};
  CellBuckets buckets;
  buckets[cell_key(cell, cfg.map_w(), cfg.map_h())].candidates = {{0.9f, 0},
                                                                  {0.4f, 1}};

  SUBCASE("max keeps the best candidate") {
    const ScoreMapStack s = assign_scores(buckets, cfg, Assignment::kMax);
    CHECK(s.score[1](7, 4) == 0.9f);
    CHECK(s.id[1](7, 4) == 0);
    CHECK(s.non_empty() == 1);
  }

  SUBCASE("sum clamps to 1 and names the max candidate") {
    const ScoreMapStack s = assign_scores(buckets, cfg, Assignment::kSum);
    CHECK(s.score[1](7, 4) == 1.0f);  // 1.3 clamped
    CHECK(s.id[1](7, 4) == 0);
  }

  SUBCASE("sum below the clamp") {
    CellBuckets b2;
    b2[cell_key(cell, cfg.map_w(), cfg.map_h())].candidates = {{0.3f, 0},
                                                               {0.4f, 1}};
    const ScoreMapStack s = assign_scores(b2, cfg, Assignment::kSum);
    CHECK(s.score[1](7, 4) == doctest::Approx(0.7f));
    CHECK(s.id[1](7, 4) == 1);
  }

  SUBCASE("random is deterministic under the seed") {
    cfg.seed = 99;
    const ScoreMapStack a = assign_scores(buckets, cfg, Assignment::kRandom);
    const ScoreMapStack b = assign_scores(buckets, cfg, Assignment::kRandom);
    CHECK(stacks_equal(a, b));
    const int picked = a.id[1](7, 4);
    CHECK((picked == 0 || picked == 1));
  }

  SUBCASE("singleton bucket: every variant keeps the candidate") {
    CellBuckets b1;
    b1[cell_key(cell, cfg.map_w(), cfg.map_h())].candidates = {{0.6f, 5}};
    for (Assignment v :
         {Assignment::kMax, Assignment::kSum, Assignment::kRandom}) {
      const ScoreMapStack s = assign_scores(b1, cfg, v);
      CHECK(s.score[1](7, 4) == 0.6f);
      CHECK(s.id[1](7, 4) == 5);
    }
  }

  SUBCASE("max tie goes to the lowest det_id") {
    CellBuckets bt;
    bt[cell_key(cell, cfg.map_w(), cfg.map_h())].candidates = {{0.5f, 7},
                                                               {0.5f, 3}};
    const ScoreMapStack s = assign_scores(bt, cfg, Assignment::kMax);
    CHECK(s.id[1](7, 4) == 3);
  }
}

TEST_CASE("build_score_maps basics") {
  const NmsConfig cfg;

  SUBCASE("empty input gives an all-empty stack") {
    const ScoreMapStack s = build_score_maps({}, cfg, Projection::kRecovery);
    CHECK(s.non_empty() == 0);
    CHECK(s.channels() == 12);
    CHECK(s.map_w == 50);
    CHECK(s.map_h == 50);
  }

  SUBCASE("far-apart boxes of different sizes occupy distinct channels") {
    // 64x64 at (100,100): channel C(0,1)=1, cell (6,6)
    // 256x256 at (600,600): channel C(2,1)=7, cell (37,37)
    const std::vector<Detection> dets = {det_at(100, 100, 64, 64, 0.9f, 0),
                                         det_at(600, 600, 256, 256, 0.8f, 1)};
    const ScoreMapStack s = build_score_maps(dets, cfg, Projection::kRecovery);
    CHECK(s.non_empty() == 2);
    CHECK(s.id[1](6, 6) == 0);
    CHECK(s.id[7](37, 37) == 1);
  }

  SUBCASE("same cell and channel collapses to the max candidate") {
    const std::vector<Detection> dets = {det_at(100, 100, 64, 64, 0.7f, 0),
                                         det_at(101, 101, 65, 63, 0.9f, 1)};
    const ScoreMapStack s = build_score_maps(dets, cfg, Projection::kRecovery);
    CHECK(s.non_empty() == 1);
    CHECK(s.id[1](6, 6) == 1);
    CHECK(s.score[1](6, 6) == 0.9f);
  }
}

TEST_CASE("recovery correctness on exact scale/ratio boxes") {
  const NmsConfig cfg;
  std::mt19937 rng(11);
  std::uniform_real_distribution<float> pos(50.0f, 750.0f);
  for (int si = 0; si < 4; ++si) {
    for (int ri = 0; ri < 3; ++ri) {
      const float area = cfg.scales[si];
      const float ratio = cfg.ratios[ri];
      const float w = std::sqrt(area / ratio);
      const float h = std::sqrt(area * ratio);
      const Detection d = det_at(pos(rng), pos(rng), w, h, 0.5f, 0);
      const CellIndex cell = project(d, cfg, Projection::kRecovery);
      CHECK(cell.channel == cfg.channel_index(si, ri));
    }
  }
}

TEST_CASE("conservation: stack ids are a subset of the input") {
  const NmsConfig cfg;
  std::mt19937 rng(17);
  std::uniform_real_distribution<float> pos(0.0f, 800.0f);
  std::uniform_real_distribution<float> side(8.0f, 600.0f);
  std::uniform_real_distribution<float> sc(0.01f, 1.0f);

  std::vector<Detection> dets;
  for (int i = 0; i < 300; ++i) {
    dets.push_back(det_at(pos(rng), pos(rng), side(rng), side(rng), sc(rng), i));
  }
  const ScoreMapStack s = build_score_maps(dets, cfg, Projection::kRecovery);
  CHECK(s.non_empty() <= static_cast<long>(dets.size()));
  std::vector<bool> seen(dets.size(), false);
  long on_stack = 0;
  for (int c = 0; c < s.channels(); ++c) {
    for (int y = 0; y < s.map_h; ++y) {
      for (int x = 0; x < s.map_w; ++x) {
        if (s.cell_empty(c, y, x)) continue;
        const int id = s.id[c](y, x);
        ++on_stack;
        REQUIRE(id >= 0);
        REQUIRE(id < static_cast<int>(dets.size()));
        CHECK(!seen[id]);  // at most one cell per detection
        seen[id] = true;
      }
    }
  }
  CHECK(on_stack == s.non_empty());
}

TEST_CASE("stack is permutation-invariant for max and sum") {
  std::mt19937 rng(23);
  std::uniform_real_distribution<float> pos(0.0f, 800.0f);
  std::uniform_real_distribution<float> side(8.0f, 300.0f);
  std::uniform_real_distribution<float> sc(0.01f, 1.0f);

  std::vector<Detection> dets;
  for (int i = 0; i < 200; ++i) {
    dets.push_back(det_at(pos(rng), pos(rng), side(rng), side(rng), sc(rng), i));
  }
  std::vector<Detection> shuffled = dets;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);

  for (Assignment v : {Assignment::kMax, Assignment::kSum}) {
    NmsConfig cfg;
    cfg.assignment = v;
    const ScoreMapStack a = build_score_maps(dets, cfg, Projection::kRecovery);
    const ScoreMapStack b =
        build_score_maps(shuffled, cfg, Projection::kRecovery);
    CHECK(stacks_equal(a, b));
  }
}

TEST_CASE("max scatter path matches the bucket route") {
  std::mt19937 rng(29);
  std::uniform_real_distribution<float> pos(0.0f, 800.0f);
  std::uniform_real_distribution<float> side(8.0f, 300.0f);
  std::uniform_real_distribution<float> sc(0.01f, 1.0f);

  NmsConfig cfg;
  std::vector<Detection> dets;
  for (int i = 0; i < 150; ++i) {
    dets.push_back(det_at(pos(rng), pos(rng), side(rng), side(rng), sc(rng), i));
  }
  const ScoreMapStack fast = build_score_maps(dets, cfg, Projection::kRecovery);

  CellBuckets buckets;
  for (const Detection& d : dets) {
    const CellIndex cell = project(d, cfg, Projection::kRecovery);
    buckets[cell_key(cell, cfg.map_w(), cfg.map_h())].candidates.push_back(
        {d.score, d.det_id});
  }
  const ScoreMapStack slow = assign_scores(buckets, cfg, Assignment::kMax);
  CHECK(stacks_equal(fast, slow));
}

TEST_CASE("build_score_maps propagates the legacy anchor requirement") {
  const NmsConfig cfg;
  const std::vector<Detection> dets = {det_at(100, 100, 64, 64, 0.9f, 0)};
  CHECK_THROWS_AS(build_score_maps(dets, cfg, Projection::kLegacy),
                  std::invalid_argument);
}

TEST_CASE("write_stack_trace emits a readable header") {
  const NmsConfig cfg;
  const std::vector<Detection> dets = {det_at(100, 100, 64, 64, 0.9f, 0)};
  const ScoreMapStack s = build_score_maps(dets, cfg, Projection::kRecovery);
  const auto path =
      std::filesystem::temp_directory_path() / "nmsforge_stack_trace.txt";
  write_stack_trace(s, path.string());
  std::ifstream in(path);
  REQUIRE(in.good());
  std::string line;
  std::getline(in, line);
  CHECK(line == "channels=12 map_h=50 map_w=50");
  std::getline(in, line);
  CHECK(line.starts_with("scales="));
  std::getline(in, line);
  CHECK(line.starts_with("ratios="));
  std::filesystem::remove(path);
}
