#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "t2/data/image_io.hpp"
#include "t2/harness/ablation.hpp"
#include "t2/harness/checkpoint.hpp"
#include "t2/harness/evaluate.hpp"
#include "t2/harness/pr_plot.hpp"
#include "t2/harness/train.hpp"
#include "t2/synthlight.hpp"

namespace {

using namespace t2;

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> sets;
  std::string data;
};

void add_common(CLI::App* sub, CommonOpts& c, bool with_data) {
  sub->add_option("--config", c.config_path, "key=value config file");
  sub->add_option("--set", c.sets, "override key=value (repeatable)");
  if (with_data)
    sub->add_option("--data", c.data,
                    "corpus directory (default: $T2_DATA_DIR)");
}

KvConfig load_kv(const CommonOpts& c) {
  KvConfig kv;
  if (!c.config_path.empty()) kv = KvConfig::from_file(c.config_path);
  for (const auto& s : c.sets) kv.set_pair(s);
  return kv;
}

std::string data_dir(const CommonOpts& c) {
  if (!c.data.empty()) return c.data;
  if (const char* env = std::getenv("T2_DATA_DIR"); env && *env) return env;
  throw ValidationError("no corpus directory: pass --data or set T2_DATA_DIR");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  size_t pos = 0;
  while (pos <= s.size()) {
    const size_t comma = s.find(',', pos);
    const std::string item =
        s.substr(pos, comma == std::string::npos ? comma : comma - pos);
    if (!item.empty()) out.push_back(item);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

void draw_rect(Tensor<float>& img, const Box& b, const float rgb[3]) {
  const int x1 = std::clamp(static_cast<int>(std::lround(b.x1)), 0, img.w - 1);
  const int x2 = std::clamp(static_cast<int>(std::lround(b.x2)), 1, img.w);
  const int y1 = std::clamp(static_cast<int>(std::lround(b.y1)), 0, img.h - 1);
  const int y2 = std::clamp(static_cast<int>(std::lround(b.y2)), 1, img.h);
  auto paint = [&](int y, int x) {
    for (int c = 0; c < 3; ++c) img.at(0, c, y, x) = rgb[c];
  };
  for (int t = 0; t < 2; ++t) {
    const int top = std::min(y1 + t, img.h - 1);
    const int bot = std::max(y2 - 1 - t, 0);
    for (int x = x1; x < x2; ++x) {
      paint(top, x);
      paint(bot, x);
    }
    const int left = std::min(x1 + t, img.w - 1);
    const int right = std::max(x2 - 1 - t, 0);
    for (int y = y1; y < y2; ++y) {
      paint(y, left);
      paint(y, right);
    }
  }
}

int run(int argc, char** argv) {
  CLI::App app{"decomposition-and-aggregation low-light object detection"};
  app.require_subcommand(1);
  CommonOpts c;

  auto* gen = app.add_subcommand(
      "gen-data", "render a synthetic low-light corpus (synth.* keys)");
  add_common(gen, c, true);
  gen->callback([&] {
    KvConfig kv = load_kv(c);
    SynthConfig sc;
    apply(kv, sc);
    kv.reject_unknown();
    const std::string out = data_dir(c);
    const auto ids = build_corpus(sc, out);
    std::cout << "wrote " << ids.size() << " scenes to " << out << "\n";
  });

  std::string run_dir = "run";
  auto* train = app.add_subcommand(
      "train", "train a detector (model.*, train.*, loss.*, eval.* keys)");
  add_common(train, c, true);
  train->add_option("--run-dir", run_dir, "log and checkpoint directory");
  train->callback([&] {
    KvConfig kv = load_kv(c);
    ModelConfig mc;
    TrainConfig tc;
    DetectionLossConfig lc;
    EvalConfig ec;
    apply(kv, mc);
    apply(kv, tc);
    apply(kv, lc);
    apply(kv, ec);
    kv.reject_unknown();
    lc.num_classes = mc.num_classes;
    Dataset ds = load_dataset(data_dir(c));
    Model<float> model;
    model.init(mc, tc.seed);
    auto res = train_model(model, ds, tc, lc, ec, run_dir);
    std::cout << "trained " << res.steps << " steps, loss "
              << res.first_loss << " -> " << res.final_loss << "\n"
              << "checkpoint: " << res.checkpoint_path << "\n";
  });

  std::string ckpt, out_dir = "eval";
  auto* eval = app.add_subcommand(
      "eval", "evaluate a checkpoint on a split (model.*, eval.* keys)");
  add_common(eval, c, true);
  eval->add_option("--checkpoint", ckpt, "checkpoint file")->required();
  eval->add_option("--out", out_dir, "report directory");
  eval->callback([&] {
    KvConfig kv = load_kv(c);
    ModelConfig mc;
    EvalConfig ec;
    apply(kv, mc);
    apply(kv, ec);
    kv.reject_unknown();
    Dataset ds = load_dataset(data_dir(c));
    Model<float> model;
    model.init(mc, 1);
    load_checkpoint(ckpt, model);
    auto out = evaluate_model(model, ds, ec);
    write_report(out, out_dir);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "map %.6f", out.result.map);
    std::cout << buf << " on split " << ec.split << " (" << out.num_images
              << " images), reports in " << out_dir << "\n";
  });

  std::string image_path, overlay_path;
  auto* detect = app.add_subcommand(
      "detect", "run one image through a checkpoint and print detections");
  add_common(detect, c, false);
  detect->add_option("--image", image_path, "input PNG")->required();
  detect->add_option("--checkpoint", ckpt, "checkpoint file")->required();
  detect->add_option("--overlay", overlay_path,
                     "also write the image with detection outlines");
  detect->callback([&] {
    KvConfig kv = load_kv(c);
    ModelConfig mc;
    EvalConfig ec;
    apply(kv, mc);
    apply(kv, ec);
    kv.reject_unknown();
    Model<float> model;
    model.init(mc, 1);
    load_checkpoint(ckpt, model);

    Tensor<float> img = read_png_rgb8(image_path);
    const auto anchors = generate_anchors(img.h, img.w, mc.anchors);
    Graph<float> g(false);
    auto f = model.forward(g, g.constant(img));
    auto dets = decode_detections(g, f.cls, f.reg, anchors, mc.num_classes,
                                  img.h, img.w, ec.detect)[0];
    std::sort(dets.begin(), dets.end(), [](const auto& a, const auto& b) {
      return a.score > b.score;
    });
    char buf[160];
    for (const auto& d : dets) {
      const char* name =
          d.class_id < kSynthClasses ? synth_class_name(d.class_id) : "?";
      std::snprintf(buf, sizeof(buf), "%d %s %.4f %.1f %.1f %.1f %.1f",
                    d.class_id, name, d.score, d.box.x1, d.box.y1, d.box.x2,
                    d.box.y2);
      std::cout << buf << "\n";
    }
    if (!overlay_path.empty()) {
      const float palette[4][3] = {{1.0f, 0.25f, 0.25f},
                                   {0.25f, 1.0f, 0.25f},
                                   {0.35f, 0.55f, 1.0f},
                                   {1.0f, 0.9f, 0.2f}};
      for (const auto& d : dets) draw_rect(img, d.box, palette[d.class_id % 4]);
      write_png_rgb8(overlay_path, img);
      std::cout << "overlay: " << overlay_path << "\n";
    }
  });

  std::string variants = "A,B,C,D,E,T2", seeds = "1,2,3";
  auto* ablate = app.add_subcommand(
      "ablate", "train and test every variant x seed under one budget");
  add_common(ablate, c, true);
  ablate->add_option("--out", out_dir, "sweep directory")->required();
  ablate->add_option("--variants", variants, "comma list (default all six)");
  ablate->add_option("--seeds", seeds, "comma list of training seeds");
  ablate->callback([&] {
    KvConfig kv = load_kv(c);
    ModelConfig mc;
    TrainConfig tc;
    DetectionLossConfig lc;
    EvalConfig ec;
    apply(kv, mc);
    apply(kv, tc);
    apply(kv, lc);
    apply(kv, ec);
    kv.reject_unknown();
    lc.num_classes = mc.num_classes;
    std::vector<uint64_t> seed_list;
    for (const auto& s : split_list(seeds))
      seed_list.push_back(std::stoull(s));
    Dataset ds = load_dataset(data_dir(c));
    run_ablation(ds, mc, tc, lc, ec, split_list(variants), seed_list, out_dir);
    std::ifstream tbl(out_dir + "/table.txt");
    std::cout << tbl.rdbuf();
  });

  std::string plot_dir, svg_out;
  auto* plot = app.add_subcommand(
      "plot-pr", "render the pr_*.csv files of an eval directory as one SVG");
  add_common(plot, c, false);
  plot->add_option("--dir", plot_dir, "eval report directory")->required();
  plot->add_option("--out", svg_out, "output file (default <dir>/pr.svg)");
  plot->callback([&] {
    KvConfig kv = load_kv(c);
    kv.reject_unknown();
    std::vector<std::string> files;
    for (const auto& e : std::filesystem::directory_iterator(plot_dir)) {
      const std::string name = e.path().filename().string();
      if (name.rfind("pr_", 0) == 0 && name.size() > 7 &&
          name.substr(name.size() - 4) == ".csv")
        files.push_back(name);
    }
    require(!files.empty(), "no pr_*.csv files in " + plot_dir);
    std::sort(files.begin(), files.end());
    std::vector<PrCurve> curves;
    std::vector<std::string> labels;
    for (const auto& name : files) {
      std::ifstream f(plot_dir + "/" + name);
      if (!f) throw IoError("cannot open " + plot_dir + "/" + name);
      PrCurve curve;
      std::string line;
      std::getline(f, line);  // header
      while (std::getline(f, line)) {
        const auto parts = split_list(line);
        require(parts.size() == 3, name + ": bad row '" + line + "'");
        curve.points.push_back(
            {std::stod(parts[0]), std::stod(parts[1]), std::stod(parts[2])});
      }
      curves.push_back(std::move(curve));
      labels.push_back(name.substr(3, name.size() - 7));
    }
    const std::string out = svg_out.empty() ? plot_dir + "/pr.svg" : svg_out;
    write_pr_svg(out, curves, labels);
    std::cout << "wrote " << out << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const LookupError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
