#pragma once

#include <string>
#include <vector>

#include "t2/data/dataset.hpp"
#include "t2/harness/config.hpp"

namespace t2 {

struct EvalOutcome {
  std::string split;
  int num_images = 0;
  double iou_threshold = 0.5;
  MapResult result;
  std::vector<PrCurve> curves;  // indexed by class id
};

// Inference-mode forward over every image of a split in batches, decoded and
// suppressed, then AP per class at the configured overlap. An empty split is
// a validation failure.
EvalOutcome evaluate_model(Model<float>& model, const Dataset& ds,
                           const EvalConfig& ec);

// report.txt (aligned per-class table plus mAP), report.csv
// (class,name,truths,ap) and one pr_<name>.csv per class
// (threshold,recall,precision). Fixed 6-digit formatting keeps identical
// results byte-identical on disk.
void write_report(const EvalOutcome& out, const std::string& dir);

}  // namespace t2
