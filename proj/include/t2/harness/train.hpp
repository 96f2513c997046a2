#pragma once

#include <string>

#include "t2/data/dataset.hpp"
#include "t2/harness/config.hpp"

namespace t2 {

struct TrainResult {
  int steps = 0;
  double first_loss = 0;
  double final_loss = 0;
  double val_map = -1;  // most recent validation mAP, -1 when never computed
  std::string checkpoint_path;
};

// Trains an already-initialized model: shuffled minibatches with optional
// flip/crop augmentation, SGD with linear warmup into a constant rate,
// per-step logging to <run_dir>/train_log.txt, periodic validation when the
// corpus has a val split, and a final checkpoint <run_dir>/model.ckpt.
// A non-finite loss aborts with DivergenceError naming the step.
TrainResult train_model(Model<float>& model, const Dataset& ds,
                        const TrainConfig& tc, const DetectionLossConfig& lc,
                        const EvalConfig& ec, const std::string& run_dir);

}  // namespace t2
