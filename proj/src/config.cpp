#include "t2/harness/config.hpp"

#include <algorithm>
#include <fstream>

#include "json.hpp"

namespace t2 {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  return std::all_of(k.begin(), k.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' ||
           c == '.';
  });
}

}  // namespace

KvConfig KvConfig::from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config file: " + path);
  KvConfig kv;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, path + ":" + std::to_string(lineno) +
                                         ": expected key=value, got '" + line +
                                         "'");
    const std::string key = trim(line.substr(0, eq));
    require(valid_key(key), path + ":" + std::to_string(lineno) +
                                ": bad key '" + key + "'");
    kv.values[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

void KvConfig::set_pair(const std::string& kv) {
  const auto eq = kv.find('=');
  require(eq != std::string::npos,
          "override must be key=value, got '" + kv + "'");
  const std::string key = trim(kv.substr(0, eq));
  require(valid_key(key), "bad override key '" + key + "'");
  values[key] = trim(kv.substr(eq + 1));
}

std::string KvConfig::get_string(const std::string& key,
                                 const std::string& fallback) {
  consumed.insert(key);
  auto it = values.find(key);
  return it == values.end() ? fallback : it->second;
}

double KvConfig::get_double(const std::string& key, double fallback) {
  consumed.insert(key);
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(it->second, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  require(pos == it->second.size() && !it->second.empty(),
          "config key " + key + ": not a number: '" + it->second + "'");
  return v;
}

int KvConfig::get_int(const std::string& key, int fallback) {
  consumed.insert(key);
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  size_t pos = 0;
  long v = 0;
  try {
    v = std::stol(it->second, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  require(pos == it->second.size() && !it->second.empty(),
          "config key " + key + ": not an integer: '" + it->second + "'");
  return static_cast<int>(v);
}

uint64_t KvConfig::get_u64(const std::string& key, uint64_t fallback) {
  consumed.insert(key);
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(it->second, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  require(pos == it->second.size() && !it->second.empty(),
          "config key " + key + ": not an unsigned integer: '" + it->second +
              "'");
  return v;
}

bool KvConfig::get_bool(const std::string& key, bool fallback) {
  consumed.insert(key);
  auto it = values.find(key);
  if (it == values.end()) return fallback;
  const std::string& s = it->second;
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ValidationError("config key " + key + ": not a boolean: '" + s + "'");
}

void KvConfig::reject_unknown() const {
  std::string stray;
  for (const auto& [key, value] : values) {
    (void)value;
    if (!consumed.count(key)) stray += (stray.empty() ? "" : ", ") + key;
  }
  require(stray.empty(), "unknown config keys: " + stray);
}

void apply(KvConfig& kv, SynthConfig& cfg) {
  cfg.seed = kv.get_u64("synth.seed", cfg.seed);
  cfg.canvas = kv.get_int("synth.canvas", cfg.canvas);
  cfg.train = kv.get_int("synth.train", cfg.train);
  cfg.val = kv.get_int("synth.val", cfg.val);
  cfg.test = kv.get_int("synth.test", cfg.test);
  cfg.min_objects = kv.get_int("synth.min_objects", cfg.min_objects);
  cfg.max_objects = kv.get_int("synth.max_objects", cfg.max_objects);
  cfg.min_size = kv.get_double("synth.min_size", cfg.min_size);
  cfg.max_size = kv.get_double("synth.max_size", cfg.max_size);
  cfg.max_overlap = kv.get_double("synth.max_overlap", cfg.max_overlap);
  cfg.noise_sigma = kv.get_double("synth.noise_sigma", cfg.noise_sigma);
  cfg.darkness_min = kv.get_double("synth.darkness_min", cfg.darkness_min);
  cfg.darkness_max = kv.get_double("synth.darkness_max", cfg.darkness_max);
  cfg.field_floor = kv.get_double("synth.field_floor", cfg.field_floor);
  cfg.max_field_step = kv.get_double("synth.max_field_step", cfg.max_field_step);
}

void apply(KvConfig& kv, TrainConfig& cfg) {
  cfg.learning_rate = kv.get_double("train.learning_rate", cfg.learning_rate);
  cfg.momentum = kv.get_double("train.momentum", cfg.momentum);
  cfg.weight_decay = kv.get_double("train.weight_decay", cfg.weight_decay);
  cfg.batch_size = kv.get_int("train.batch_size", cfg.batch_size);
  cfg.epochs = kv.get_int("train.epochs", cfg.epochs);
  cfg.warmup_steps = kv.get_int("train.warmup_steps", cfg.warmup_steps);
  cfg.resize = kv.get_int("train.resize", cfg.resize);
  cfg.seed = kv.get_u64("train.seed", cfg.seed);
  cfg.augment = kv.get_bool("train.augment", cfg.augment);
  cfg.eval_every = kv.get_int("train.eval_every", cfg.eval_every);
  cfg.crop_min = kv.get_double("train.crop_min", cfg.crop_min);
}

void apply(KvConfig& kv, ModelConfig& cfg) {
  cfg.variant = kv.get_string("model.variant", cfg.variant);
  parse_variant(cfg.variant);
  cfg.num_classes = kv.get_int("model.num_classes", cfg.num_classes);
  cfg.sdm.width = kv.get_int("model.sdm_width", cfg.sdm.width);
  cfg.aggregator.width = kv.get_int("model.agg_width", cfg.aggregator.width);
  cfg.aggregator.bilinear_upsample =
      kv.get_bool("model.bilinear_upsample", cfg.aggregator.bilinear_upsample);
  cfg.backbone.per_stream_stats =
      kv.get_bool("model.per_stream_stats", cfg.backbone.per_stream_stats);
  cfg.head_bg_prior = kv.get_double("model.bg_prior", cfg.head_bg_prior);
  cfg.anchors.scale_mult = kv.get_double("model.anchor_scale",
                                         cfg.anchors.scale_mult);
}

void apply(KvConfig& kv, DetectionLossConfig& cfg) {
  cfg.alpha = kv.get_double("loss.alpha", cfg.alpha);
  cfg.gamma = kv.get_double("loss.gamma", cfg.gamma);
  cfg.alpha_f = kv.get_double("loss.alpha_f", cfg.alpha_f);
  cfg.iou_threshold = kv.get_double("loss.iou_threshold", cfg.iou_threshold);
  cfg.mining.ratio = kv.get_double("loss.mining_ratio", cfg.mining.ratio);
  cfg.mining.floor_negatives =
      kv.get_int("loss.floor_negatives", cfg.mining.floor_negatives);
}

void apply(KvConfig& kv, EvalConfig& cfg) {
  cfg.split = kv.get_string("eval.split", cfg.split);
  cfg.iou_threshold = kv.get_double("eval.iou_threshold", cfg.iou_threshold);
  cfg.detect.score_threshold =
      kv.get_double("eval.score_threshold", cfg.detect.score_threshold);
  cfg.detect.nms_overlap =
      kv.get_double("eval.nms_overlap", cfg.detect.nms_overlap);
  cfg.detect.nms_keep_top = kv.get_int("eval.keep_top", cfg.detect.nms_keep_top);
  cfg.batch_size = kv.get_int("eval.batch_size", cfg.batch_size);
}

void validate(const TrainConfig& cfg) {
  require(cfg.learning_rate >= 0.0, "train.learning_rate must be nonnegative");
  require(cfg.momentum >= 0.0 && cfg.momentum < 1.0,
          "train.momentum must be in [0,1)");
  require(cfg.weight_decay >= 0.0, "train.weight_decay must be nonnegative");
  require(cfg.batch_size >= 1, "train.batch_size must be positive");
  require(cfg.epochs >= 1, "train.epochs must be positive");
  require(cfg.warmup_steps >= 0, "train.warmup_steps must be nonnegative");
  require(cfg.resize >= 128 && cfg.resize % 128 == 0,
          "train.resize must be a positive multiple of 128");
  require(cfg.crop_min > 0.0 && cfg.crop_min <= 1.0,
          "train.crop_min must be in (0,1]");
  require(cfg.eval_every >= 0, "train.eval_every must be nonnegative");
}

std::string config_echo(const ModelConfig& mc, const TrainConfig& tc,
                        const DetectionLossConfig& lc, uint64_t dataset_seed) {
  nlohmann::json j;
  j["model"] = {{"variant", mc.variant},
                {"num_classes", mc.num_classes},
                {"sdm_width", mc.sdm.width},
                {"agg_width", mc.aggregator.width},
                {"bilinear_upsample", mc.aggregator.bilinear_upsample},
                {"per_stream_stats", mc.backbone.per_stream_stats},
                {"bg_prior", mc.head_bg_prior},
                {"anchor_scale", mc.anchors.scale_mult},
                {"anchor_ratios", mc.anchors.ratios}};
  j["train"] = {{"learning_rate", tc.learning_rate},
                {"momentum", tc.momentum},
                {"weight_decay", tc.weight_decay},
                {"batch_size", tc.batch_size},
                {"epochs", tc.epochs},
                {"warmup_steps", tc.warmup_steps},
                {"resize", tc.resize},
                {"seed", tc.seed},
                {"augment", tc.augment},
                {"eval_every", tc.eval_every},
                {"crop_min", tc.crop_min}};
  j["loss"] = {{"alpha", lc.alpha},
               {"gamma", lc.gamma},
               {"alpha_f", lc.alpha_f},
               {"iou_threshold", lc.iou_threshold},
               {"mining_ratio", lc.mining.ratio},
               {"floor_negatives", lc.mining.floor_negatives}};
  j["dataset_seed"] = dataset_seed;
  return j.dump();
}

}  // namespace t2
