#include <random>

#include "doctest.h"
#include "nmsforge/greedy.hpp"

using namespace nmsforge;

namespace {

Detection det(float x1, float y1, float x2, float y2, float score, int id,
              int cls = 0) {
  Detection d;
  d.box = {x1, y1, x2, y2};
  d.score = score;
  d.det_id = id;
  d.class_id = cls;
  return d;
}

std::vector<Detection> random_scene(std::mt19937& rng, int n) {
  std::uniform_real_distribution<float> pos(0.0f, 400.0f);
  std::uniform_real_distribution<float> side(10.0f, 120.0f);
  std::uniform_real_distribution<float> sc(0.0f, 1.0f);
  std::vector<Detection> dets;
  for (int i = 0; i < n; ++i) {
    const float x = pos(rng), y = pos(rng), w = side(rng), h = side(rng);
    dets.push_back(det(x, y, x + w, y + h, sc(rng), i));
  }
  return dets;
}

}  // namespace

TEST_CASE("greedy keeps a lone box") {
  const std::vector<Detection> dets = {det(0, 0, 10, 10, 0.5f, 0)};
  const KeptSet kept = greedy_nms(dets, 0.5f, 100);
  CHECK(kept.ids == std::vector<int>{0});
}

TEST_CASE("greedy suppresses the identical lower-scored box") {
  const std::vector<Detection> dets = {det(0, 0, 10, 10, 0.9f, 0),
                                       det(0, 0, 10, 10, 0.8f, 1)};
  const KeptSet kept = greedy_nms(dets, 0.5f, 100);
  CHECK(kept.ids == std::vector<int>{0});
}

TEST_CASE("greedy keeps boxes under the threshold") {
  // iou(A,B) = 1/3 < 0.5, C disjoint
  const std::vector<Detection> dets = {det(0, 0, 10, 10, 0.9f, 0),
                                       det(5, 0, 15, 10, 0.8f, 1),
                                       det(20, 20, 30, 30, 0.7f, 2)};
  const KeptSet kept = greedy_nms(dets, 0.5f, 100);
  CHECK(kept.ids == std::vector<int>{0, 1, 2});
}

TEST_CASE("greedy on empty input") {
  CHECK(greedy_nms({}, 0.5f, 10).empty());
}

TEST_CASE("greedy tie-break is ascending det_id") {
  // same score, identical boxes: the lower id wins
  const std::vector<Detection> dets = {det(0, 0, 10, 10, 0.5f, 3),
                                       det(0, 0, 10, 10, 0.5f, 1)};
  CHECK(greedy_nms(dets, 0.5f, 10).ids == std::vector<int>{1});

  // same score, disjoint: both kept, id order
  const std::vector<Detection> far = {det(50, 50, 60, 60, 0.5f, 9),
                                      det(0, 0, 10, 10, 0.5f, 2)};
  CHECK(greedy_nms(far, 0.5f, 10).ids == std::vector<int>{2, 9});
}

TEST_CASE("greedy top_k truncation") {
  const std::vector<Detection> dets = {det(0, 0, 10, 10, 0.9f, 0),
                                       det(100, 100, 110, 110, 0.8f, 1),
                                       det(200, 200, 210, 210, 0.7f, 2)};
  CHECK(greedy_nms(dets, 0.5f, 2).ids == std::vector<int>{0, 1});
}

TEST_CASE("greedy pairwise and maximality properties") {
  std::mt19937 rng(123);
  for (int trial = 0; trial < 20; ++trial) {
    const auto dets = random_scene(rng, 80);
    const float thresh = 0.5f;
    const KeptSet kept = greedy_nms(dets, thresh, 1000);

    // pairwise: kept boxes never overlap >= thresh
    for (std::size_t i = 0; i < kept.ids.size(); ++i) {
      for (std::size_t j = i + 1; j < kept.ids.size(); ++j) {
        CHECK(iou(dets[kept.ids[i]].box, dets[kept.ids[j]].box) < thresh);
      }
    }

    // maximality: every suppressed box overlaps a higher-scored kept box
    std::vector<bool> is_kept(dets.size(), false);
    for (int id : kept.ids) is_kept[id] = true;
    for (const Detection& d : dets) {
      if (is_kept[d.det_id]) continue;
      bool covered = false;
      for (int kid : kept.ids) {
        const Detection& k = dets[kid];
        const bool higher = k.score > d.score ||
                            (k.score == d.score && k.det_id < d.det_id);
        if (higher && iou(d.box, k.box) >= thresh) {
          covered = true;
          break;
        }
      }
      CHECK(covered);
    }

    // determinism and size bound
    CHECK(greedy_nms(dets, thresh, 1000).ids == kept.ids);
    CHECK(kept.size() <= dets.size());
  }
}

TEST_CASE("per-class wrapper") {
  NmsConfig config;
  config.greedy_iou = 0.5f;

  SUBCASE("two classes, one box each") {
    const std::vector<Detection> dets = {det(0, 0, 10, 10, 0.9f, 0, 0),
                                         det(100, 100, 110, 110, 0.8f, 1, 1)};
    const auto by_class = greedy_nms_all_classes(dets, config);
    CHECK(by_class.at(0).ids == std::vector<int>{0});
    CHECK(by_class.at(1).ids == std::vector<int>{1});
  }

  SUBCASE("identical boxes in different classes both survive") {
    const std::vector<Detection> dets = {det(0, 0, 10, 10, 0.9f, 0, 0),
                                         det(0, 0, 10, 10, 0.8f, 1, 1)};
    const auto by_class = greedy_nms_all_classes(dets, config);
    CHECK(by_class.at(0).ids == std::vector<int>{0});
    CHECK(by_class.at(1).ids == std::vector<int>{1});
  }

  SUBCASE("single class reduces to greedy_nms") {
    std::mt19937 rng(5);
    const auto dets = random_scene(rng, 40);
    const auto by_class = greedy_nms_all_classes(dets, config);
    CHECK(by_class.size() == 1);
    CHECK(by_class.at(0).ids ==
          greedy_nms(dets, config.greedy_iou, config.top_k).ids);
  }

  SUBCASE("parallel wrapper matches sequential") {
    std::mt19937 rng(6);
    auto dets = random_scene(rng, 60);
    for (std::size_t i = 0; i < dets.size(); ++i) {
      dets[i].class_id = static_cast<int>(i % 4);
    }
    NmsConfig par = config;
    par.parallel = true;
    const auto seq = greedy_nms_all_classes(dets, config);
    const auto parr = greedy_nms_all_classes(dets, par);
    REQUIRE(seq.size() == parr.size());
    for (const auto& [cls, kept] : seq) CHECK(parr.at(cls).ids == kept.ids);
  }
}
