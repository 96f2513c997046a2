#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <tuple>
#include <vector>

#include "t2/core/tensor.hpp"
#include "t2/det/boxes.hpp"

namespace t2 {

// The six pyramid levels every pipeline stage agrees on. `tag` records which
// conv layer of the originating block is tapped; it is metadata carried for
// reporting, the tap itself is always the block output.
struct PyramidLevelMeta {
  int level;
  int tag;
  int stride;
};

inline constexpr std::array<PyramidLevelMeta, 6> kPyramidLevels = {{
    {3, 3, 4},
    {4, 3, 8},
    {5, 3, 16},
    {6, 2, 32},
    {7, 2, 64},
    {8, 2, 128},
}};

struct AnchorConfig {
  double scale_mult = 4.0;            // anchor size = scale_mult * stride
  std::vector<double> ratios = {1.0};  // w/h aspect ratios
};

// Flat anchor list, level-major; within a level the order is
// (row, column, ratio). Centers sit at (i + 0.5) * stride.
struct AnchorSet {
  std::vector<Box> boxes;
  std::array<Eigen::Index, 7> level_begin{};  // offsets per level + total
  std::array<int, 6> grid_h{};
  std::array<int, 6> grid_w{};
  int num_ratios = 1;

  Eigen::Index size() const { return level_begin[6]; }

  Eigen::Index index(int level_idx, int y, int x, int ratio) const {
    return level_begin[level_idx] +
           (static_cast<Eigen::Index>(y) * grid_w[level_idx] + x) * num_ratios +
           ratio;
  }
};

inline AnchorSet generate_anchors(int image_h, int image_w,
                                  const AnchorConfig& cfg) {
  require(image_h % 128 == 0 && image_w % 128 == 0,
          "generate_anchors: image dims must be divisible by 128, got " +
              std::to_string(image_h) + "x" + std::to_string(image_w));
  require(!cfg.ratios.empty(), "generate_anchors: empty ratio set");
  AnchorSet set;
  set.num_ratios = static_cast<int>(cfg.ratios.size());
  Eigen::Index off = 0;
  for (int li = 0; li < 6; ++li) {
    set.level_begin[li] = off;
    const int stride = kPyramidLevels[li].stride;
    const int gh = image_h / stride, gw = image_w / stride;
    set.grid_h[li] = gh;
    set.grid_w[li] = gw;
    const double scale = cfg.scale_mult * stride;
    for (int y = 0; y < gh; ++y)
      for (int x = 0; x < gw; ++x)
        for (double r : cfg.ratios) {
          const double cx = (x + 0.5) * stride;
          const double cy = (y + 0.5) * stride;
          const double w = scale * std::sqrt(r);
          const double h = scale / std::sqrt(r);
          set.boxes.push_back(Box::from_center(cx, cy, w, h));
          ++off;
        }
  }
  set.level_begin[6] = off;
  return set;
}

// Per-anchor assignment: index of the matched ground truth, or -1.
struct MatchResult {
  std::vector<int> truth_of;
  int num_positives = 0;
};

// Two phases: (1) each anchor takes its best-IoU truth when that IoU clears
// the threshold; (2) every still-unmatched truth claims its best positive-IoU
// anchor, preferring free anchors and stealing from a truth with a spare
// positive otherwise, so no overlapped truth goes entirely unmatched.
inline MatchResult match(const AnchorSet& anchors,
                         const std::vector<Annotation>& truths,
                         double iou_threshold = 0.3) {
  const Eigen::Index A = anchors.size();
  const int T = static_cast<int>(truths.size());
  MatchResult res;
  res.truth_of.assign(A, -1);
  if (T == 0) return res;

  Eigen::MatrixXd ious(T, A);
  for (int t = 0; t < T; ++t)
    for (Eigen::Index a = 0; a < A; ++a)
      ious(t, a) = iou(truths[t].box, anchors.boxes[a]);

  std::vector<int> positives_of_truth(T, 0);
  for (Eigen::Index a = 0; a < A; ++a) {
    int best_t = 0;
    for (int t = 1; t < T; ++t)
      if (ious(t, a) > ious(best_t, a)) best_t = t;
    if (ious(best_t, a) > iou_threshold) {
      res.truth_of[a] = best_t;
      ++positives_of_truth[best_t];
    }
  }

  std::vector<std::tuple<double, int, Eigen::Index>> pairs;
  for (int t = 0; t < T; ++t) {
    if (positives_of_truth[t] > 0) continue;
    for (Eigen::Index a = 0; a < A; ++a)
      if (ious(t, a) > 0.0) pairs.emplace_back(-ious(t, a), t, a);
  }
  std::sort(pairs.begin(), pairs.end());
  std::vector<uint8_t> claimed(A, 0);
  for (const auto& [neg_iou, t, a] : pairs) {
    (void)neg_iou;
    if (positives_of_truth[t] > 0 || claimed[a]) continue;
    const int holder = res.truth_of[a];
    if (holder >= 0 && positives_of_truth[holder] < 2) continue;
    if (holder >= 0) --positives_of_truth[holder];
    res.truth_of[a] = t;
    claimed[a] = 1;
    ++positives_of_truth[t];
  }

  for (Eigen::Index a = 0; a < A; ++a)
    if (res.truth_of[a] >= 0) ++res.num_positives;
  return res;
}

struct BoxCoding {
  double v_center = 0.1;
  double v_size = 0.2;
};

inline std::array<double, 4> encode(const Box& truth, const Box& anchor,
                                    const BoxCoding& v = {}) {
  require(anchor.area() > 0, "encode: degenerate anchor");
  return {(truth.cx() - anchor.cx()) / (anchor.width() * v.v_center),
          (truth.cy() - anchor.cy()) / (anchor.height() * v.v_center),
          std::log(truth.width() / anchor.width()) / v.v_size,
          std::log(truth.height() / anchor.height()) / v.v_size};
}

inline Box decode(const std::array<double, 4>& t, const Box& anchor,
                  const BoxCoding& v = {}) {
  require(anchor.area() > 0, "decode: degenerate anchor");
  const double cx = t[0] * v.v_center * anchor.width() + anchor.cx();
  const double cy = t[1] * v.v_center * anchor.height() + anchor.cy();
  const double w = anchor.width() * std::exp(t[2] * v.v_size);
  const double h = anchor.height() * std::exp(t[3] * v.v_size);
  return Box::from_center(cx, cy, w, h);
}

}  // namespace t2
