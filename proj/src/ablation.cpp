#include "t2/harness/ablation.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "json.hpp"
#include "t2/data/checksum.hpp"
#include "t2/harness/evaluate.hpp"
#include "t2/harness/train.hpp"

namespace t2 {

namespace {

using nlohmann::json;

std::string fmt6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

// a finished run is reusable only if its stored config checksum still matches
bool cached_map(const std::string& path, const std::string& crc, double* map) {
  std::ifstream f(path);
  if (!f) return false;
  json j;
  try {
    f >> j;
  } catch (const json::exception&) {
    return false;
  }
  if (!j.contains("config_crc") || !j.contains("map")) return false;
  if (j["config_crc"].get<std::string>() != crc) return false;
  *map = j["map"].get<double>();
  return true;
}

}  // namespace

AblationResult run_ablation(const Dataset& ds, const ModelConfig& base_mc,
                            const TrainConfig& tc,
                            const DetectionLossConfig& lc, const EvalConfig& ec,
                            const std::vector<std::string>& variants,
                            const std::vector<uint64_t>& seeds,
                            const std::string& out_dir) {
  require(!variants.empty() && !seeds.empty(),
          "ablation needs at least one variant and one seed");
  std::filesystem::create_directories(out_dir);

  AblationResult result;
  for (const auto& variant : variants) {
    parse_variant(variant);  // fail fast on a typo before any training
    for (uint64_t seed : seeds) {
      ModelConfig mc = base_mc;
      mc.variant = variant;
      TrainConfig rtc = tc;
      rtc.seed = seed;
      const std::string echo = config_echo(mc, rtc, lc, ds.seed);
      const std::string crc =
          crc32_hex(crc32_bytes(echo.data(), echo.size()));
      const std::string run_dir =
          out_dir + "/" + variant + "_s" + std::to_string(seed);
      const std::string result_path = run_dir + "/result.json";

      AblationRun run;
      run.variant = variant;
      run.seed = seed;
      if (cached_map(result_path, crc, &run.map)) {
        run.status = "cached";
        result.runs.push_back(run);
        continue;
      }
      try {
        Model<float> model;
        model.init(mc, seed);
        train_model(model, ds, rtc, lc, ec, run_dir);
        auto out = evaluate_model(model, ds, ec);
        write_report(out, run_dir);

        json j;
        j["variant"] = variant;
        j["seed"] = seed;
        j["split"] = ec.split;
        j["map"] = out.result.map;
        j["config_crc"] = crc;
        std::ofstream f(result_path, std::ios::trunc);
        if (!f) throw IoError("cannot write " + result_path);
        f << j.dump(2) << "\n";

        run.map = out.result.map;
        run.status = "ok";
      } catch (const std::exception& e) {
        run.map = -1;
        run.status = e.what();
      }
      result.runs.push_back(run);
      std::cout << "[ablation] " << variant << " seed " << seed << ": "
                << (run.map >= 0 ? fmt6(run.map) : run.status) << "\n";
    }
  }

  {
    std::ofstream csv(out_dir + "/ablation.csv", std::ios::trunc);
    if (!csv) throw IoError("cannot write " + out_dir + "/ablation.csv");
    csv << "variant,seed,map,status\n";
    for (const auto& r : result.runs) {
      csv << r.variant << "," << r.seed << ",";
      if (r.map >= 0) csv << fmt6(r.map);
      csv << "," << r.status << "\n";
    }
  }
  {
    std::ofstream tbl(out_dir + "/table.txt", std::ios::trunc);
    if (!tbl) throw IoError("cannot write " + out_dir + "/table.txt");
    char line[160];
    for (const auto& variant : variants) {
      double sum = 0, lo = 1e9, hi = -1e9;
      int n = 0, failed = 0;
      for (const auto& r : result.runs) {
        if (r.variant != variant) continue;
        if (r.map < 0) {
          ++failed;
          continue;
        }
        sum += r.map;
        lo = std::min(lo, r.map);
        hi = std::max(hi, r.map);
        ++n;
      }
      const double mean = n > 0 ? sum / n : -1;
      result.mean_map.emplace_back(variant, mean);
      if (n > 0)
        std::snprintf(line, sizeof(line),
                      "%-3s mean %.6f min %.6f max %.6f (n=%d)",
                      variant.c_str(), mean, lo, hi, n);
      else
        std::snprintf(line, sizeof(line), "%-3s all runs failed",
                      variant.c_str());
      tbl << line;
      if (failed > 0 && n > 0) tbl << "  [" << failed << " failed]";
      tbl << "\n";
    }
  }
  return result;
}

}  // namespace t2
