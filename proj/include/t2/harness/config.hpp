#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "t2/det/detection_loss.hpp"
#include "t2/model/model.hpp"
#include "t2/synthlight.hpp"

namespace t2 {

// Flat dotted key=value configuration ("train.learning_rate=0.0005").
// '#' starts a comment; blank lines are skipped. Typed getters record which
// keys were read so a final sweep can reject typos.
struct KvConfig {
  std::map<std::string, std::string> values;
  std::set<std::string> consumed;

  static KvConfig from_file(const std::string& path);

  void set_pair(const std::string& kv);  // "key=value", used by CLI overrides
  bool has(const std::string& key) const { return values.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback);
  double get_double(const std::string& key, double fallback);
  int get_int(const std::string& key, int fallback);
  uint64_t get_u64(const std::string& key, uint64_t fallback);
  bool get_bool(const std::string& key, bool fallback);

  // every key must have been consumed by some apply(); leftovers are typos
  void reject_unknown() const;
};

struct TrainConfig {
  double learning_rate = 5e-4;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int batch_size = 4;
  int epochs = 30;
  int warmup_steps = 100;
  int resize = 128;
  uint64_t seed = 1;
  bool augment = true;
  int eval_every = 10;    // epochs between val evaluations; 0 disables
  double crop_min = 0.6;  // random crop lower scale bound
};

struct EvalConfig {
  std::string split = "test";
  double iou_threshold = 0.5;  // AP matching overlap
  DetectConfig detect;
  int batch_size = 8;
};

void apply(KvConfig& kv, SynthConfig& cfg);         // synth.*
void apply(KvConfig& kv, TrainConfig& cfg);         // train.*
void apply(KvConfig& kv, ModelConfig& cfg);         // model.*
void apply(KvConfig& kv, DetectionLossConfig& cfg); // loss.*
void apply(KvConfig& kv, EvalConfig& cfg);          // eval.*

void validate(const TrainConfig& cfg);

// canonical json echo of every setting that affects a training run; stored in
// checkpoints and used by the ablation runner to recognize completed work
std::string config_echo(const ModelConfig& mc, const TrainConfig& tc,
                        const DetectionLossConfig& lc, uint64_t dataset_seed);

}  // namespace t2
