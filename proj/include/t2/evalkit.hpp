#pragma once

#include <vector>

#include "t2/det/boxes.hpp"

namespace t2 {

// Greedy score-descending suppression: a box is dropped when its IoU with an
// already kept box exceeds `overlap`. Ties break by score desc, then input
// index asc. At most keep_top boxes survive. Call per class.
std::vector<Detection> nms(const std::vector<Detection>& dets,
                           double overlap = 0.3, int keep_top = 750);

struct ApResult {
  double ap = 0;
  int num_truths = 0;
  bool zero_truths = false;  // AP pinned to 0 and flagged
};

// dets_per_image / truths_per_image are indexed by image; detections are
// matched only against truths of their own image. Both inputs are single
// class: filter before calling. Greedy matching in score order (ties by
// image then insertion order): each detection takes the best still-free
// truth with IoU >= iou_threshold. AP integrates the stepwise
// precision-recall envelope over every point (all-point interpolation).
ApResult average_precision(
    const std::vector<std::vector<Detection>>& dets_per_image,
    const std::vector<std::vector<Box>>& truths_per_image,
    double iou_threshold = 0.5);

// single-image convenience
ApResult average_precision(const std::vector<Detection>& dets,
                           const std::vector<Box>& truths,
                           double iou_threshold = 0.5);

struct PrPoint {
  double threshold = 0;
  double recall = 0;
  double precision = 0;
};

struct PrCurve {
  int class_id = -1;
  std::vector<PrPoint> points;  // one per unique score, descending threshold
};

PrCurve pr_curve(const std::vector<std::vector<Detection>>& dets_per_image,
                 const std::vector<std::vector<Box>>& truths_per_image,
                 double iou_threshold = 0.5, int class_id = -1);

struct MapResult {
  std::vector<ApResult> per_class;  // indexed by class id
  double map = 0;
};

// Unweighted mean over all num_classes classes; classes without truths
// contribute 0 and are flagged in per_class.
MapResult mean_ap(const std::vector<std::vector<Detection>>& dets_per_image,
                  const std::vector<std::vector<Annotation>>& truths_per_image,
                  int num_classes, double iou_threshold = 0.5);

}  // namespace t2
