#include "t2/evalkit.hpp"

#include <algorithm>
#include <numeric>

#include "t2/core/tensor.hpp"

namespace t2 {

namespace {

// stable detection ranking: score desc, then original position
std::vector<int> rank_by_score(const std::vector<Detection>& dets) {
  std::vector<int> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return dets[a].score > dets[b].score;
  });
  return order;
}

struct RankedDet {
  int image = 0;
  int index = 0;  // position within its image's list
  double score = 0;
};

// global ranking across images: score desc, image asc, index asc
std::vector<RankedDet> rank_all(
    const std::vector<std::vector<Detection>>& dets_per_image) {
  std::vector<RankedDet> all;
  for (int im = 0; im < static_cast<int>(dets_per_image.size()); ++im)
    for (int i = 0; i < static_cast<int>(dets_per_image[im].size()); ++i)
      all.push_back({im, i, dets_per_image[im][i].score});
  std::stable_sort(all.begin(), all.end(), [](const RankedDet& a, const RankedDet& b) {
    return a.score > b.score;
  });
  return all;
}

// per-detection TP/FP flags under greedy matching, in ranked order
std::vector<uint8_t> greedy_tp_flags(
    const std::vector<RankedDet>& ranked,
    const std::vector<std::vector<Detection>>& dets_per_image,
    const std::vector<std::vector<Box>>& truths_per_image,
    double iou_threshold) {
  std::vector<std::vector<uint8_t>> claimed(truths_per_image.size());
  for (size_t im = 0; im < truths_per_image.size(); ++im)
    claimed[im].assign(truths_per_image[im].size(), 0);
  std::vector<uint8_t> tp(ranked.size(), 0);
  for (size_t k = 0; k < ranked.size(); ++k) {
    const auto& rd = ranked[k];
    const Detection& d = dets_per_image[rd.image][rd.index];
    const auto& truths = truths_per_image[rd.image];
    int best = -1;
    double best_iou = 0;
    for (int t = 0; t < static_cast<int>(truths.size()); ++t) {
      if (claimed[rd.image][t]) continue;
      const double v = iou(d.box, truths[t]);
      if (v >= iou_threshold && v > best_iou) {
        best = t;
        best_iou = v;
      }
    }
    if (best >= 0) {
      claimed[rd.image][best] = 1;
      tp[k] = 1;
    }
  }
  return tp;
}

int count_truths(const std::vector<std::vector<Box>>& truths_per_image) {
  int n = 0;
  for (const auto& t : truths_per_image) n += static_cast<int>(t.size());
  return n;
}

}  // namespace

std::vector<Detection> nms(const std::vector<Detection>& dets, double overlap,
                           int keep_top) {
  for (const auto& d : dets)
    require(box_valid(d.box) && std::isfinite(d.score),
            "nms: invalid detection");
  const auto order = rank_by_score(dets);
  std::vector<Detection> kept;
  for (int idx : order) {
    if (static_cast<int>(kept.size()) >= keep_top) break;
    bool suppressed = false;
    for (const auto& k : kept)
      if (iou(dets[idx].box, k.box) > overlap) {
        suppressed = true;
        break;
      }
    if (!suppressed) kept.push_back(dets[idx]);
  }
  return kept;
}

ApResult average_precision(
    const std::vector<std::vector<Detection>>& dets_per_image,
    const std::vector<std::vector<Box>>& truths_per_image,
    double iou_threshold) {
  require(dets_per_image.size() == truths_per_image.size(),
          "average_precision: image count mismatch");
  ApResult res;
  res.num_truths = count_truths(truths_per_image);
  if (res.num_truths == 0) {
    res.zero_truths = true;
    return res;  // AP defined as 0
  }
  const auto ranked = rank_all(dets_per_image);
  const auto tp =
      greedy_tp_flags(ranked, dets_per_image, truths_per_image, iou_threshold);

  // precision at each prefix, then area under the recall-indexed envelope
  std::vector<double> recall(ranked.size()), precision(ranked.size());
  int tps = 0;
  for (size_t k = 0; k < ranked.size(); ++k) {
    tps += tp[k];
    recall[k] = static_cast<double>(tps) / res.num_truths;
    precision[k] = static_cast<double>(tps) / static_cast<double>(k + 1);
  }
  double ap = 0, env = 0;
  for (size_t k = ranked.size(); k-- > 0;) {
    env = std::max(env, precision[k]);
    const double prev_recall = k == 0 ? 0.0 : recall[k - 1];
    ap += env * (recall[k] - prev_recall);
  }
  res.ap = ap;
  return res;
}

ApResult average_precision(const std::vector<Detection>& dets,
                           const std::vector<Box>& truths,
                           double iou_threshold) {
  return average_precision(std::vector<std::vector<Detection>>{dets},
                           std::vector<std::vector<Box>>{truths},
                           iou_threshold);
}

PrCurve pr_curve(const std::vector<std::vector<Detection>>& dets_per_image,
                 const std::vector<std::vector<Box>>& truths_per_image,
                 double iou_threshold, int class_id) {
  require(dets_per_image.size() == truths_per_image.size(),
          "pr_curve: image count mismatch");
  PrCurve curve;
  curve.class_id = class_id;
  const int num_truths = count_truths(truths_per_image);
  const auto ranked = rank_all(dets_per_image);
  if (ranked.empty()) return curve;
  const auto tp =
      greedy_tp_flags(ranked, dets_per_image, truths_per_image, iou_threshold);
  int tps = 0;
  for (size_t k = 0; k < ranked.size(); ++k) {
    tps += tp[k];
    const bool last_of_score =
        k + 1 == ranked.size() || ranked[k + 1].score < ranked[k].score;
    if (!last_of_score) continue;  // one point per unique score threshold
    PrPoint pt;
    pt.threshold = ranked[k].score;
    pt.recall = num_truths > 0 ? static_cast<double>(tps) / num_truths : 0.0;
    pt.precision = static_cast<double>(tps) / static_cast<double>(k + 1);
    curve.points.push_back(pt);
  }
  return curve;
}

MapResult mean_ap(const std::vector<std::vector<Detection>>& dets_per_image,
                  const std::vector<std::vector<Annotation>>& truths_per_image,
                  int num_classes, double iou_threshold) {
  require(num_classes > 0, "mean_ap: need at least one class");
  require(dets_per_image.size() == truths_per_image.size(),
          "mean_ap: image count mismatch");
  MapResult res;
  double sum = 0;
  for (int c = 0; c < num_classes; ++c) {
    std::vector<std::vector<Detection>> cd(dets_per_image.size());
    std::vector<std::vector<Box>> ct(truths_per_image.size());
    for (size_t im = 0; im < dets_per_image.size(); ++im) {
      for (const auto& d : dets_per_image[im])
        if (d.class_id == c) cd[im].push_back(d);
      for (const auto& a : truths_per_image[im])
        if (a.class_id == c) ct[im].push_back(a.box);
    }
    res.per_class.push_back(average_precision(cd, ct, iou_threshold));
    sum += res.per_class.back().ap;
  }
  res.map = sum / num_classes;
  return res;
}

}  // namespace t2
