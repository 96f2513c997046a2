#include <cmath>

#include "doctest.h"
#include "support/oracles.hpp"
#include "t2/core/rng.hpp"
#include "t2/evalkit.hpp"

using namespace t2;

namespace {

Box random_box(Rng& rng, double span = 100.0) {
  const double x1 = rng.uniform(0, span - 6);
  const double y1 = rng.uniform(0, span - 6);
  return {x1, y1, x1 + rng.uniform(5, 40), y1 + rng.uniform(5, 40)};
}

}  // namespace

TEST_CASE("iou spot values and properties") {
  const Box a{0, 0, 10, 10};
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(a, {20, 20, 30, 30}) == 0.0);
  CHECK(iou(a, {5, 5, 15, 15}) == doctest::Approx(25.0 / 175.0).epsilon(1e-12));

  Rng rng(31);
  for (int i = 0; i < 200; ++i) {
    const Box p = random_box(rng), q = random_box(rng);
    const double v = iou(p, q);
    CHECK(v == iou(q, p));
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("nms spot behaviour") {
  const Detection d1{{0, 0, 10, 10}, 0, 0.9};
  const Detection d2{{0, 0, 10, 10}, 0, 0.8};
  const Detection d3{{50, 50, 60, 60}, 0, 0.7};

  CHECK(nms({d1}).size() == 1);

  auto two_same = nms({d2, d1});
  REQUIRE(two_same.size() == 1);
  CHECK(two_same[0].score == 0.9);

  auto disjoint = nms({d1, d3});
  CHECK(disjoint.size() == 2);

  // equal scores: earlier input index wins
  Detection e1 = d1, e2 = d1;
  e1.score = e2.score = 0.5;
  e2.box.x1 += 1;  // distinguishable, still heavy overlap
  auto tied = nms({e1, e2});
  REQUIRE(tied.size() == 1);
  CHECK(tied[0].box.x1 == e1.box.x1);

  // keep_top truncates
  std::vector<Detection> spread;
  for (int i = 0; i < 10; ++i)
    spread.push_back({{i * 20.0, 0, i * 20.0 + 10, 10}, 0, 0.5 + 0.01 * i});
  CHECK(nms(spread, 0.3, 3).size() == 3);
}

TEST_CASE("nms equals the brute-force reference on randomized instances") {
  Rng rng(32);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + rng.uniform_int(50);
    std::vector<Detection> dets;
    for (int i = 0; i < n; ++i)
      dets.push_back({random_box(rng), 0, rng.uniform()});
    const double overlap = rng.uniform(0.1, 0.7);
    const int keep = 1 + rng.uniform_int(n + 5);
    auto fast = nms(dets, overlap, keep);
    auto slow = testing::nms_bruteforce(dets, overlap, keep);
    REQUIRE(fast.size() == slow.size());
    for (size_t i = 0; i < fast.size(); ++i) {
      CHECK(fast[i].score == slow[i].score);
      CHECK(fast[i].box.x1 == slow[i].box.x1);
    }
  }
}

TEST_CASE("average precision spot cases") {
  const Box t{10, 10, 30, 30};

  // every truth found, no false positives
  auto perfect = average_precision({{t, 0, 0.9}}, {t});
  CHECK(perfect.ap == doctest::Approx(1.0));
  CHECK_FALSE(perfect.zero_truths);

  // higher-scored false positive first: PR points (0,0), (1,0.5) -> AP 0.5
  auto half = average_precision(
      {{{60, 60, 80, 80}, 0, 0.9}, {t, 0, 0.8}}, {t});
  CHECK(half.ap == doctest::Approx(0.5).epsilon(1e-12));

  CHECK(average_precision(std::vector<Detection>{}, {t}).ap == 0.0);

  auto zero = average_precision({{t, 0, 0.9}}, std::vector<Box>{});
  CHECK(zero.ap == 0.0);
  CHECK(zero.zero_truths);
}

TEST_CASE("detections only match truths of their own image") {
  const Box t{10, 10, 30, 30};
  // image 0 has the truth; image 1 has an identically placed detection
  std::vector<std::vector<Box>> truths = {{t}, {}};
  std::vector<std::vector<Detection>> wrong_image = {{}, {{t, 0, 0.9}}};
  CHECK(average_precision(wrong_image, truths).ap == 0.0);
  std::vector<std::vector<Detection>> right_image = {{{t, 0, 0.9}}, {}};
  CHECK(average_precision(right_image, truths).ap == doctest::Approx(1.0));
}

TEST_CASE("average precision equals brute force on randomized instances") {
  Rng rng(33);
  for (int trial = 0; trial < 1000; ++trial) {
    const int images = 1 + rng.uniform_int(2);
    std::vector<std::vector<Detection>> dets(images);
    std::vector<std::vector<Box>> truths(images);
    const int nd = rng.uniform_int(21);
    const int nt = rng.uniform_int(6);
    for (int i = 0; i < nd; ++i)
      dets[rng.uniform_int(images)].push_back({random_box(rng), 0, rng.uniform()});
    for (int i = 0; i < nt; ++i)
      truths[rng.uniform_int(images)].push_back(random_box(rng));
    const double thr = rng.uniform(0.3, 0.7);
    const double fast = average_precision(dets, truths, thr).ap;
    const double slow = testing::ap_bruteforce(dets, truths, thr);
    CHECK(std::abs(fast - slow) < 1e-9);
  }
}

TEST_CASE("pr curve shapes") {
  const Box t{10, 10, 30, 30};
  auto curve = pr_curve({{{{60, 60, 80, 80}, 0, 0.9}, {t, 0, 0.8}}}, {{t}});
  REQUIRE(curve.points.size() == 2);
  CHECK(curve.points[0].threshold == 0.9);
  CHECK(curve.points[0].recall == 0.0);
  CHECK(curve.points[0].precision == 0.0);
  CHECK(curve.points[1].threshold == 0.8);
  CHECK(curve.points[1].recall == 1.0);
  CHECK(curve.points[1].precision == 0.5);

  auto empty = pr_curve({{}}, {{t}});
  CHECK(empty.points.empty());

  // perfect detector: precision pinned at 1 throughout
  std::vector<Detection> dets;
  std::vector<Box> truths;
  for (int i = 0; i < 5; ++i) {
    Box b{i * 30.0, 0, i * 30.0 + 20, 20};
    truths.push_back(b);
    dets.push_back({b, 0, 0.5 + 0.1 * i});
  }
  auto perfect = pr_curve({dets}, {truths});
  REQUIRE(perfect.points.size() == 5);
  double prev_recall = -1;
  for (const auto& p : perfect.points) {
    CHECK(p.precision == 1.0);
    CHECK(p.recall > prev_recall);
    prev_recall = p.recall;
  }
}

TEST_CASE("mean ap: class mean, zero-truth flagging, relabel invariance") {
  Rng rng(34);
  const int num_classes = 4;
  std::vector<std::vector<Detection>> dets(3);
  std::vector<std::vector<Annotation>> truths(3);
  for (int i = 0; i < 25; ++i) {
    const int im = rng.uniform_int(3);
    const int c = rng.uniform_int(3);  // class 3 never appears
    if (i % 2 == 0)
      truths[im].push_back({random_box(rng), c});
    else
      dets[im].push_back({random_box(rng), c, rng.uniform()});
  }
  auto res = mean_ap(dets, truths, num_classes);
  REQUIRE(static_cast<int>(res.per_class.size()) == num_classes);
  CHECK(res.per_class[3].zero_truths);
  CHECK(res.per_class[3].ap == 0.0);
  double sum = 0;
  for (const auto& pc : res.per_class) sum += pc.ap;
  CHECK(res.map == doctest::Approx(sum / num_classes));

  // permute class labels: mAP unchanged
  const int perm[4] = {2, 0, 3, 1};
  auto dets_p = dets;
  auto truths_p = truths;
  for (auto& im : dets_p)
    for (auto& d : im) d.class_id = perm[d.class_id];
  for (auto& im : truths_p)
    for (auto& a : im) a.class_id = perm[a.class_id];
  auto res_p = mean_ap(dets_p, truths_p, num_classes);
  CHECK(res_p.map == doctest::Approx(res.map).epsilon(1e-12));
}
