#pragma once

#include <algorithm>
#include <vector>

#include "t2/det/boxes.hpp"

namespace t2::testing {

// Deliberately naive suppression: repeatedly scan every undecided detection
// for the current best (score desc, index asc), keep it unless it overlaps a
// kept box, until all are decided or the keep budget is spent.
inline std::vector<Detection> nms_bruteforce(const std::vector<Detection>& dets,
                                             double overlap, int keep_top) {
  std::vector<int> state(dets.size(), 0);  // 0 undecided, 1 kept, 2 dropped
  std::vector<Detection> kept;
  while (static_cast<int>(kept.size()) < keep_top) {
    int best = -1;
    for (int i = 0; i < static_cast<int>(dets.size()); ++i)
      if (state[i] == 0 && (best < 0 || dets[i].score > dets[best].score))
        best = i;
    if (best < 0) break;
    bool overlapped = false;
    for (int i = 0; i < static_cast<int>(dets.size()); ++i)
      if (state[i] == 1 && iou(dets[best].box, dets[i].box) > overlap)
        overlapped = true;
    state[best] = overlapped ? 2 : 1;
    if (!overlapped) kept.push_back(dets[best]);
  }
  return kept;
}

// From-scratch average precision: for every prefix of the ranked detection
// list, rerun greedy truth matching from zero and record raw (recall,
// precision); integrate the envelope with a fresh scan per recall step.
// Assumes unique scores (the caller generates them that way).
inline double ap_bruteforce(
    const std::vector<std::vector<Detection>>& dets_per_image,
    const std::vector<std::vector<Box>>& truths_per_image, double thr) {
  struct Ref {
    int im, idx;
    double score;
  };
  std::vector<Ref> ranked;
  for (int im = 0; im < static_cast<int>(dets_per_image.size()); ++im)
    for (int i = 0; i < static_cast<int>(dets_per_image[im].size()); ++i)
      ranked.push_back({im, i, dets_per_image[im][i].score});
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Ref& a, const Ref& b) { return a.score > b.score; });
  int total_truths = 0;
  for (const auto& t : truths_per_image) total_truths += static_cast<int>(t.size());
  if (total_truths == 0) return 0.0;

  const int N = static_cast<int>(ranked.size());
  std::vector<double> recall(N), precision(N);
  for (int k = 1; k <= N; ++k) {
    std::vector<std::vector<int>> used(truths_per_image.size());
    for (size_t im = 0; im < truths_per_image.size(); ++im)
      used[im].assign(truths_per_image[im].size(), 0);
    int tp = 0;
    for (int j = 0; j < k; ++j) {
      const auto& r = ranked[j];
      const Detection& d = dets_per_image[r.im][r.idx];
      int best = -1;
      double best_iou = 0;
      for (int t = 0; t < static_cast<int>(truths_per_image[r.im].size()); ++t) {
        if (used[r.im][t]) continue;
        const double v = iou(d.box, truths_per_image[r.im][t]);
        if (v >= thr && v > best_iou) {
          best = t;
          best_iou = v;
        }
      }
      if (best >= 0) {
        used[r.im][best] = 1;
        ++tp;
      }
    }
    recall[k - 1] = static_cast<double>(tp) / total_truths;
    precision[k - 1] = static_cast<double>(tp) / k;
  }

  double ap = 0;
  for (int k = 0; k < N; ++k) {
    const double prev = k == 0 ? 0.0 : recall[k - 1];
    if (recall[k] <= prev) continue;
    double env = 0;
    for (int j = 0; j < N; ++j)
      if (recall[j] >= recall[k]) env = std::max(env, precision[j]);
    ap += (recall[k] - prev) * env;
  }
  return ap;
}

}  // namespace t2::testing
