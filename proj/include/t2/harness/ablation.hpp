#pragma once

#include <string>
#include <utility>
#include <vector>

#include "t2/data/dataset.hpp"
#include "t2/harness/config.hpp"

namespace t2 {

struct AblationRun {
  std::string variant;
  uint64_t seed = 0;
  double map = -1;     // -1 when the run failed
  std::string status;  // "ok", "cached", or an error note
};

struct AblationResult {
  std::vector<AblationRun> runs;
  // per-variant mean over succeeded seeds, in requested variant order;
  // -1 when every seed of a variant failed
  std::vector<std::pair<std::string, double>> mean_map;
};

// Trains and tests every requested variant with every seed under one shared
// budget. Each run lives in <out_dir>/<variant>_s<seed>/ and leaves a
// result.json stamped with a config checksum, so an interrupted sweep
// resumes past completed runs and invalidates stale ones. A failing run is
// recorded and the sweep continues. Writes <out_dir>/ablation.csv and an
// aligned <out_dir>/table.txt.
AblationResult run_ablation(const Dataset& ds, const ModelConfig& base_mc,
                            const TrainConfig& tc,
                            const DetectionLossConfig& lc, const EvalConfig& ec,
                            const std::vector<std::string>& variants,
                            const std::vector<uint64_t>& seeds,
                            const std::string& out_dir);

}  // namespace t2
