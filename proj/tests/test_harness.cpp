#include <cstring>
#include <fstream>
#include <set>

#include "doctest.h"
#include "support/tmpdir.hpp"
#include "t2/harness/ablation.hpp"
#include "t2/harness/checkpoint.hpp"
#include "t2/harness/evaluate.hpp"
#include "t2/harness/pr_plot.hpp"
#include "t2/harness/train.hpp"
#include "t2/nn/sgd.hpp"

using namespace t2;
using t2::testing::TmpDir;

namespace {

ModelConfig tiny_model(const std::string& variant) {
  ModelConfig mc;
  mc.variant = variant;
  mc.sdm.width = 8;
  mc.aggregator.width = 8;
  return mc;
}

TrainConfig fast_train() {
  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 2;
  tc.warmup_steps = 2;
  tc.eval_every = 0;
  tc.seed = 3;
  return tc;
}

SynthConfig tiny_corpus(int train = 4, int val = 2, int test = 2) {
  SynthConfig sc;
  sc.seed = 19;
  sc.train = train;
  sc.val = val;
  sc.test = test;
  return sc;
}

// two fixed scenes stacked into a batch, with their truth boxes
std::pair<Tensor<float>, std::vector<std::vector<Annotation>>> fixed_batch() {
  SynthConfig cfg;
  cfg.noise_sigma = 0.0;
  auto s0 = render_scene(cfg, 0);
  auto s1 = render_scene(cfg, 1);
  auto batch = Tensor<float>::grid(2, 3, cfg.canvas, cfg.canvas);
  for (int c = 0; c < 3; ++c) {
    batch.plane(0, c) = s0.low_light.plane(0, c);
    batch.plane(1, c) = s1.low_light.plane(0, c);
  }
  return {batch, {s0.annotations, s1.annotations}};
}

std::vector<Tensor<float>> eval_outputs(Model<float>& m,
                                        const Tensor<float>& batch) {
  Graph<float> g(false);
  auto f = m.forward(g, g.constant(batch));
  std::vector<Tensor<float>> out;
  for (auto v : f.cls) out.push_back(g.val(v));
  for (auto v : f.reg) out.push_back(g.val(v));
  return out;
}

bool same_outputs(const std::vector<Tensor<float>>& a,
                  const std::vector<Tensor<float>>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (!(a[i].same_shape(b[i]) && a[i].m == b[i].m)) return false;
  return true;
}

// summed |grad| over parameters whose name starts with prefix
double grad_mass(const Model<float>& m, const std::string& prefix) {
  double s = 0;
  for (const auto* p : m.params.items)
    if (p->name.rfind(prefix, 0) == 0)
      s += p->grad.m.cast<double>().cwiseAbs().sum();
  return s;
}

bool has_prefix(const Model<float>& m, const std::string& prefix) {
  for (const auto* p : m.params.items)
    if (p->name.rfind(prefix, 0) == 0) return true;
  return false;
}

void backprop_once(Model<float>& m) {
  auto [batch, truths] = fixed_batch();
  const auto anchors = generate_anchors(batch.h, batch.w, m.cfg.anchors);
  Graph<float> g(true);
  auto f = m.forward(g, g.constant(std::move(batch)));
  DetectionLossConfig lc;
  Var loss = detection_loss(g, f.cls, f.reg, anchors, truths, lc);
  m.params.zero_grad();
  g.backward(loss);
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  return std::string((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
}

void corrupt_byte(const std::string& path, long offset) {
  std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
  REQUIRE(f.good());
  f.seekg(offset);
  char b = 0;
  f.read(&b, 1);
  f.seekp(offset);
  b = static_cast<char>(b + 1);
  f.write(&b, 1);
}

}  // namespace

TEST_CASE("config files parse with comments, spaces and overrides") {
  TmpDir dir("t2_harness_cfg");
  {
    std::ofstream f(dir.file("run.cfg"));
    f << "# training setup\n"
      << "train.learning_rate = 0.0005\n"
      << "train.epochs=3   # inline comment\n"
      << "\n"
      << "model.variant=E\n"
      << "loss.alpha = 2.0\n";
  }
  KvConfig kv = KvConfig::from_file(dir.file("run.cfg"));
  kv.set_pair("train.epochs=5");  // CLI override wins over the file

  ModelConfig mc;
  TrainConfig tc;
  DetectionLossConfig lc;
  apply(kv, mc);
  apply(kv, tc);
  apply(kv, lc);
  CHECK(tc.learning_rate == 0.0005);
  CHECK(tc.epochs == 5);
  CHECK(mc.variant == "E");
  CHECK(lc.alpha == 2.0);
  CHECK_NOTHROW(kv.reject_unknown());
}

TEST_CASE("config errors name the offender") {
  TmpDir dir("t2_harness_cfg_bad");
  {
    std::ofstream f(dir.file("bad.cfg"));
    f << "train.epochs=2\n"
      << "this line has no assignment\n";
  }
  CHECK_THROWS_WITH_AS(KvConfig::from_file(dir.file("bad.cfg")),
                       doctest::Contains(":2"), ValidationError);
  CHECK_THROWS_AS(KvConfig::from_file(dir.file("absent.cfg")), IoError);

  KvConfig kv;
  CHECK_THROWS_AS(kv.set_pair("no_equals_sign"), ValidationError);
  CHECK_THROWS_AS(kv.set_pair("Bad.Key=1"), ValidationError);

  kv.set_pair("train.epochs=abc");
  TrainConfig tc;
  CHECK_THROWS_WITH_AS(apply(kv, tc), doctest::Contains("train.epochs"),
                       ValidationError);

  KvConfig kv2;
  kv2.set_pair("train.augment=maybe");
  CHECK_THROWS_WITH_AS(apply(kv2, tc), doctest::Contains("not a boolean"),
                       ValidationError);

  KvConfig kv3;
  kv3.set_pair("train.lerning_rate=1");  // typo must not pass silently
  apply(kv3, tc);
  CHECK_THROWS_WITH_AS(kv3.reject_unknown(),
                       doctest::Contains("train.lerning_rate"),
                       ValidationError);

  KvConfig kv4;
  kv4.set_pair("model.variant=F");
  ModelConfig mc;
  CHECK_THROWS_AS(apply(kv4, mc), ValidationError);
}

TEST_CASE("training configuration is validated") {
  TrainConfig tc;
  CHECK_NOTHROW(validate(tc));
  TrainConfig bad = tc;
  bad.learning_rate = -1;
  CHECK_THROWS_AS(validate(bad), ValidationError);
  bad = tc;
  bad.momentum = 1.0;
  CHECK_THROWS_AS(validate(bad), ValidationError);
  bad = tc;
  bad.batch_size = 0;
  CHECK_THROWS_AS(validate(bad), ValidationError);
  bad = tc;
  bad.resize = 130;
  CHECK_THROWS_AS(validate(bad), ValidationError);
  bad = tc;
  bad.crop_min = 0.0;
  CHECK_THROWS_AS(validate(bad), ValidationError);
}

TEST_CASE("config echo is canonical and sensitive to every block") {
  ModelConfig mc;
  TrainConfig tc;
  DetectionLossConfig lc;
  const std::string base = config_echo(mc, tc, lc, 7);
  CHECK(config_echo(mc, tc, lc, 7) == base);

  ModelConfig mc2 = mc;
  mc2.variant = "A";
  CHECK(config_echo(mc2, tc, lc, 7) != base);
  TrainConfig tc2 = tc;
  tc2.epochs += 1;
  CHECK(config_echo(mc, tc2, lc, 7) != base);
  DetectionLossConfig lc2 = lc;
  lc2.gamma = 3.0;
  CHECK(config_echo(mc, tc, lc2, 7) != base);
  CHECK(config_echo(mc, tc, lc, 8) != base);
}

TEST_CASE("checkpoint restores a bit-identical model") {
  TmpDir dir("t2_harness_ckpt");
  ModelConfig mc = tiny_model("T2");
  Model<float> a;
  a.init(mc, 11);

  // move the BN running statistics and momentum away from their init values
  {
    auto [batch, truths] = fixed_batch();
    const auto anchors = generate_anchors(batch.h, batch.w, mc.anchors);
    Graph<float> g(true);
    auto f = a.forward(g, g.constant(std::move(batch)));
    DetectionLossConfig lc;
    Var loss = detection_loss(g, f.cls, f.reg, anchors, truths, lc);
    a.params.zero_grad();
    g.backward(loss);
    Sgd<float> opt(a.params, 1e-3f, 0.9f, 5e-4f);
    opt.step();
  }
  auto [probe, probe_truths] = fixed_batch();
  (void)probe_truths;
  const auto ref = eval_outputs(a, probe);

  CheckpointMeta meta;
  meta.epoch = 17;
  meta.config_echo = config_echo(mc, TrainConfig{}, DetectionLossConfig{}, 3);
  save_checkpoint(dir.file("m.ckpt"), a, meta);

  Model<float> b;
  b.init(mc, 12);  // different seed: different weights before the load
  CHECK_FALSE(same_outputs(eval_outputs(b, probe), ref));

  auto loaded = load_checkpoint(dir.file("m.ckpt"), b);
  CHECK(loaded.epoch == 17);
  CHECK(loaded.config_echo == meta.config_echo);
  CHECK(same_outputs(eval_outputs(b, probe), ref));

  for (size_t i = 0; i < a.params.items.size(); ++i) {
    CHECK(a.params.items[i]->value.m == b.params.items[i]->value.m);
    CHECK(a.params.items[i]->momentum.m == b.params.items[i]->momentum.m);
  }

  CHECK(peek_checkpoint_config(dir.file("m.ckpt")) == meta.config_echo);
}

TEST_CASE("checkpoint loading refuses damage and mismatches") {
  TmpDir dir("t2_harness_ckpt_bad");
  ModelConfig mc = tiny_model("T2");
  Model<float> m;
  m.init(mc, 1);
  CheckpointMeta meta;
  save_checkpoint(dir.file("m.ckpt"), m, meta);

  SUBCASE("flipped byte") {
    corrupt_byte(dir.file("m.ckpt"), 200);
    CHECK_THROWS_WITH_AS(load_checkpoint(dir.file("m.ckpt"), m),
                         doctest::Contains("checksum"), ValidationError);
  }
  SUBCASE("truncation") {
    const auto size = std::filesystem::file_size(dir.path / "m.ckpt");
    std::filesystem::resize_file(dir.path / "m.ckpt", size / 2);
    CHECK_THROWS_AS(load_checkpoint(dir.file("m.ckpt"), m), ValidationError);
  }
  SUBCASE("not a checkpoint at all") {
    std::ofstream f(dir.file("junk.ckpt"), std::ios::binary);
    f << "just some text, long enough to pass the size gate";
    f.close();
    CHECK_THROWS_WITH_AS(load_checkpoint(dir.file("junk.ckpt"), m),
                         doctest::Contains("not a checkpoint"),
                         ValidationError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_checkpoint(dir.file("absent.ckpt"), m), IoError);
  }
  SUBCASE("structurally different model") {
    ModelConfig wider = mc;
    wider.sdm.width = 16;
    Model<float> w;
    w.init(wider, 1);
    CHECK_THROWS_AS(load_checkpoint(dir.file("m.ckpt"), w), ValidationError);
  }
  SUBCASE("different variant") {
    Model<float> plain;
    plain.init(tiny_model("A"), 1);
    CHECK_THROWS_AS(load_checkpoint(dir.file("m.ckpt"), plain),
                    ValidationError);
  }
}

TEST_CASE("parameter registration matches the variant structure") {
  struct Expect {
    const char* variant;
    bool sdm, agg, lat_i;
  };
  const Expect table[] = {{"A", false, false, false}, {"B", false, true, false},
                          {"C", true, false, false},  {"D", true, false, false},
                          {"E", true, true, false},   {"T2", true, true, true}};
  for (const auto& e : table) {
    CAPTURE(e.variant);
    Model<float> m;
    m.init(tiny_model(e.variant), 2);
    CHECK(has_prefix(m, "bb.") == true);
    CHECK(has_prefix(m, "head") == true);
    CHECK(has_prefix(m, "sdm.") == e.sdm);
    CHECK(has_prefix(m, "agg.") == e.agg);
    CHECK(has_prefix(m, "agg.lat_i") == e.lat_i);
    if (e.agg) CHECK(has_prefix(m, "agg.lat_r"));
  }
}

TEST_CASE("detection gradients reach the decomposer exactly when it is used") {
  for (const char* variant : {"C", "D", "E", "T2"}) {
    CAPTURE(variant);
    Model<float> m;
    m.init(tiny_model(variant), 4);
    backprop_once(m);
    CHECK(grad_mass(m, "sdm.") > 0.0);
    CHECK(grad_mass(m, "bb.") > 0.0);
    CHECK(grad_mass(m, "head") > 0.0);
  }
  for (const char* variant : {"B", "E", "T2"}) {
    CAPTURE(variant);
    Model<float> m;
    m.init(tiny_model(variant), 4);
    backprop_once(m);
    CHECK(grad_mass(m, "agg.") > 0.0);
  }
}

TEST_CASE("short training run logs, checkpoints and stays finite") {
  TmpDir data("t2_harness_train_data"), run("t2_harness_train_run");
  build_corpus(tiny_corpus(), data.str());
  Dataset ds = load_dataset(data.str());

  ModelConfig mc = tiny_model("T2");
  TrainConfig tc = fast_train();
  tc.epochs = 2;
  tc.eval_every = 1;
  DetectionLossConfig lc;
  EvalConfig ec;

  Model<float> m;
  m.init(mc, tc.seed);
  auto res = train_model(m, ds, tc, lc, ec, run.str());

  CHECK(res.steps == 4);  // 4 train images, batch 2, 2 epochs
  CHECK(std::isfinite(res.first_loss));
  CHECK(std::isfinite(res.final_loss));
  CHECK(res.val_map >= 0.0);
  CHECK(std::filesystem::exists(run.path / "model.ckpt"));

  const std::string log = slurp(run.file("train_log.txt"));
  CHECK(std::count(log.begin(), log.end(), '\n') == 6);  // 4 steps + 2 evals
  CHECK(log.find("step 0 epoch 0 loss ") == 0);
  CHECK(log.find("step 2 epoch 1 ") != std::string::npos);
  CHECK(log.find(" rmean ") != std::string::npos);  // T2 decomposes
  CHECK(log.find("epoch 0 val_map ") != std::string::npos);
  CHECK(log.find("epoch 1 val_map ") != std::string::npos);

  // the checkpoint carries the exact configuration of this run
  CHECK(peek_checkpoint_config(run.file("model.ckpt")) ==
        config_echo(mc, tc, lc, ds.seed));
}

TEST_CASE("zero learning rate leaves every parameter untouched") {
  TmpDir data("t2_harness_lr0_data"), run("t2_harness_lr0_run");
  build_corpus(tiny_corpus(4, 0, 0), data.str());
  Dataset ds = load_dataset(data.str());

  ModelConfig mc = tiny_model("T2");
  TrainConfig tc = fast_train();
  tc.learning_rate = 0.0;

  Model<float> m;
  m.init(mc, tc.seed);
  std::vector<Tensor<float>> before;
  for (const auto* p : m.params.items) before.push_back(p->value);

  train_model(m, ds, tc, DetectionLossConfig{}, EvalConfig{}, run.str());
  for (size_t i = 0; i < before.size(); ++i)
    CHECK(m.params.items[i]->value.m == before[i].m);
}

TEST_CASE("identical seeds replay identical training runs") {
  TmpDir data("t2_harness_det_data");
  TmpDir r1("t2_harness_det_r1"), r2("t2_harness_det_r2");
  build_corpus(tiny_corpus(4, 0, 2), data.str());
  Dataset ds = load_dataset(data.str());

  ModelConfig mc = tiny_model("T2");
  TrainConfig tc = fast_train();
  tc.augment = true;  // augmentation draws must replay too

  Model<float> m1, m2;
  m1.init(mc, tc.seed);
  m2.init(mc, tc.seed);
  train_model(m1, ds, tc, DetectionLossConfig{}, EvalConfig{}, r1.str());
  train_model(m2, ds, tc, DetectionLossConfig{}, EvalConfig{}, r2.str());

  CHECK(slurp(r1.file("train_log.txt")) == slurp(r2.file("train_log.txt")));
  for (size_t i = 0; i < m1.params.items.size(); ++i)
    CHECK(m1.params.items[i]->value.m == m2.params.items[i]->value.m);
  CHECK(slurp(r1.file("model.ckpt")) == slurp(r2.file("model.ckpt")));

  auto [probe, truths] = fixed_batch();
  (void)truths;
  CHECK(same_outputs(eval_outputs(m1, probe), eval_outputs(m2, probe)));

  // a different data order changes the run
  TmpDir r3("t2_harness_det_r3");
  TrainConfig other = tc;
  other.seed = tc.seed + 1;
  Model<float> m3;
  m3.init(mc, tc.seed);  // same weights, different shuffle and augmentation
  train_model(m3, ds, other, DetectionLossConfig{}, EvalConfig{}, r3.str());
  CHECK(slurp(r1.file("train_log.txt")) != slurp(r3.file("train_log.txt")));
}

TEST_CASE("evaluation reports are complete and deterministic") {
  TmpDir data("t2_harness_eval_data"), out("t2_harness_eval_out");
  build_corpus(tiny_corpus(2, 0, 3), data.str());
  Dataset ds = load_dataset(data.str());

  Model<float> m;
  m.init(tiny_model("T2"), 6);
  EvalConfig ec;
  ec.batch_size = 2;  // odd split size forces a partial final batch

  auto a = evaluate_model(m, ds, ec);
  CHECK(a.num_images == 3);
  CHECK(a.result.per_class.size() == 4);
  CHECK(a.curves.size() == 4);
  CHECK(a.result.map >= 0.0);
  CHECK(a.result.map <= 1.0);

  auto b = evaluate_model(m, ds, ec);
  CHECK(a.result.map == b.result.map);
  for (size_t c = 0; c < a.curves.size(); ++c) {
    REQUIRE(a.curves[c].points.size() == b.curves[c].points.size());
    for (size_t i = 0; i < a.curves[c].points.size(); ++i) {
      CHECK(a.curves[c].points[i].threshold == b.curves[c].points[i].threshold);
      CHECK(a.curves[c].points[i].precision == b.curves[c].points[i].precision);
    }
  }

  write_report(a, out.str());
  const std::string txt = slurp(out.file("report.txt"));
  CHECK(txt.find("split test") != std::string::npos);
  CHECK(txt.find("map ") != std::string::npos);
  const std::string csv = slurp(out.file("report.csv"));
  CHECK(csv.find("class,name,truths,ap") == 0);
  CHECK(std::filesystem::exists(out.path / "pr_disk.csv"));
  CHECK(std::filesystem::exists(out.path / "pr_ring.csv"));

  EvalConfig empty = ec;
  empty.split = "val";  // generated with zero entries
  CHECK_THROWS_WITH_AS(evaluate_model(m, ds, empty),
                       doctest::Contains("empty"), ValidationError);
  EvalConfig unknown = ec;
  unknown.split = "holdout";
  CHECK_THROWS_AS(evaluate_model(m, ds, unknown), LookupError);
}

TEST_CASE("ablation sweep caches finished runs and tabulates") {
  TmpDir data("t2_harness_abl_data"), out("t2_harness_abl_out");
  build_corpus(tiny_corpus(4, 0, 2), data.str());
  Dataset ds = load_dataset(data.str());

  ModelConfig mc = tiny_model("T2");
  TrainConfig tc = fast_train();
  DetectionLossConfig lc;
  EvalConfig ec;

  auto first = run_ablation(ds, mc, tc, lc, ec, {"A"}, {1}, out.str());
  REQUIRE(first.runs.size() == 1);
  CHECK(first.runs[0].status == "ok");
  CHECK(first.runs[0].map >= 0.0);
  CHECK(std::filesystem::exists(out.path / "A_s1" / "result.json"));
  CHECK(std::filesystem::exists(out.path / "ablation.csv"));

  const std::string table = slurp(out.file("table.txt"));
  CHECK(table.find("A ") == 0);
  CHECK(table.find("mean ") != std::string::npos);

  // unchanged config: the finished run is reused, not retrained
  auto second = run_ablation(ds, mc, tc, lc, ec, {"A"}, {1}, out.str());
  CHECK(second.runs[0].status == "cached");
  CHECK(second.runs[0].map == first.runs[0].map);

  // any config change invalidates the cache
  DetectionLossConfig lc2 = lc;
  lc2.alpha = 0.5;
  auto third = run_ablation(ds, mc, tc, lc2, ec, {"A"}, {1}, out.str());
  CHECK(third.runs[0].status == "ok");

  const std::string csv = slurp(out.file("ablation.csv"));
  CHECK(csv.find("variant,seed,map,status") == 0);
  CHECK(csv.find("A,1,") != std::string::npos);
}

TEST_CASE("ablation table carries one row per variant tag") {
  TmpDir data("t2_harness_abl6_data"), out("t2_harness_abl6_out");
  build_corpus(tiny_corpus(2, 0, 2), data.str());
  Dataset ds = load_dataset(data.str());

  const std::vector<std::string> tags = {"A", "B", "C", "D", "E", "T2"};
  auto res = run_ablation(ds, tiny_model("T2"), fast_train(),
                          DetectionLossConfig{}, EvalConfig{}, tags, {1},
                          out.str());
  REQUIRE(res.runs.size() == tags.size());
  for (const auto& r : res.runs) CHECK(r.status == "ok");

  const std::string table = slurp(out.file("table.txt"));
  size_t rows = 0, pos = 0;
  for (const auto& tag : tags) {
    const size_t at = table.find(tag + " ", pos);
    CHECK(at != std::string::npos);
    if (at != std::string::npos) {
      ++rows;
      pos = at;
    }
  }
  CHECK(rows == tags.size());
}

TEST_CASE("pr curves render to deterministic standalone svg") {
  PrCurve full;
  full.class_id = 0;
  full.points = {{0.9, 0.2, 1.0}, {0.5, 0.6, 0.75}, {0.1, 0.8, 0.5}};
  PrCurve empty;
  empty.class_id = 1;

  const auto svg = render_pr_svg({full, empty}, {"disk", "square"});
  CHECK(svg.find("<svg") == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("polyline") != std::string::npos);
  CHECK(svg.find(">disk<") != std::string::npos);
  CHECK(svg.find("square (no detections)") != std::string::npos);
  CHECK(svg.find("recall") != std::string::npos);
  CHECK(svg.find("precision") != std::string::npos);
  CHECK(render_pr_svg({full, empty}, {"disk", "square"}) == svg);

  CHECK_THROWS_AS(render_pr_svg({full}, {"a", "b"}), ValidationError);

  TmpDir dir("t2_harness_svg");
  write_pr_svg(dir.file("pr.svg"), {full}, {"disk"});
  CHECK(slurp(dir.file("pr.svg")) == render_pr_svg({full}, {"disk"}));
}
