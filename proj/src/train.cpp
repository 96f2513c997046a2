#include "t2/harness/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <unordered_map>
#include <utility>
#include <vector>

#include "t2/harness/checkpoint.hpp"
#include "t2/harness/evaluate.hpp"
#include "t2/nn/sgd.hpp"

namespace t2 {

namespace {

void shuffle_indices(std::vector<size_t>& v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    const size_t j = static_cast<size_t>(rng.uniform_int(static_cast<int>(i)));
    std::swap(v[i - 1], v[j]);
  }
}

// Bilinear sample of the region (y0,x0)+(rh,rw) of a single image into an
// oh x ow output. Sample points sit at output pixel centers mapped into the
// region, clamped at its border.
Tensor<float> resize_region(const Tensor<float>& src, int y0, int x0, int rh,
                            int rw, int oh, int ow) {
  auto out = Tensor<float>::grid(1, src.c, oh, ow);
  const double sy = static_cast<double>(rh) / oh;
  const double sx = static_cast<double>(rw) / ow;
  for (int y = 0; y < oh; ++y) {
    double ry = (y + 0.5) * sy - 0.5;
    ry = std::clamp(ry, 0.0, static_cast<double>(rh - 1));
    const int iy = static_cast<int>(ry);
    const int iy1 = std::min(iy + 1, rh - 1);
    const float fy = static_cast<float>(ry - iy);
    for (int x = 0; x < ow; ++x) {
      double rx = (x + 0.5) * sx - 0.5;
      rx = std::clamp(rx, 0.0, static_cast<double>(rw - 1));
      const int ix = static_cast<int>(rx);
      const int ix1 = std::min(ix + 1, rw - 1);
      const float fx = static_cast<float>(rx - ix);
      for (int c = 0; c < src.c; ++c) {
        const float top = (1.0f - fx) * src.at(0, c, y0 + iy, x0 + ix) +
                          fx * src.at(0, c, y0 + iy, x0 + ix1);
        const float bot = (1.0f - fx) * src.at(0, c, y0 + iy1, x0 + ix) +
                          fx * src.at(0, c, y0 + iy1, x0 + ix1);
        out.at(0, c, y, x) = (1.0f - fy) * top + fy * bot;
      }
    }
  }
  return out;
}

void flip_horizontal(Tensor<float>& img, std::vector<Annotation>& boxes) {
  const int W = img.w;
  for (int c = 0; c < img.c; ++c)
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < W / 2; ++x)
        std::swap(img.at(0, c, y, x), img.at(0, c, y, W - 1 - x));
  for (auto& a : boxes) {
    const double x1 = a.box.x1, x2 = a.box.x2;
    a.box.x1 = W - x2;
    a.box.x2 = W - x1;
  }
}

struct Sample {
  Tensor<float> image;  // resize x resize
  std::vector<Annotation> boxes;
};

// Geometry pipeline for one training example. RNG draw order is fixed
// (flip coin, crop scale, crop x, crop y) so runs replay exactly.
Sample prepare(const Tensor<float>& src, const std::vector<Annotation>& anns,
               const TrainConfig& tc, Rng& rng) {
  Sample s;
  const int H = src.h, W = src.w;
  const int out = tc.resize;
  if (!tc.augment) {
    if (H == out && W == out) {
      s.image = src;
      s.boxes = anns;
      return s;
    }
    s.image = resize_region(src, 0, 0, H, W, out, out);
    const double kx = static_cast<double>(out) / W;
    const double ky = static_cast<double>(out) / H;
    for (const auto& a : anns)
      s.boxes.push_back({{a.box.x1 * kx, a.box.y1 * ky, a.box.x2 * kx,
                          a.box.y2 * ky},
                         a.class_id});
    return s;
  }

  const bool flip = rng.uniform() < 0.5;
  const double scale = rng.uniform(tc.crop_min, 1.0);
  const int side = std::max(
      1, static_cast<int>(std::lround(scale * std::min(H, W))));
  const int x0 = rng.uniform_int(W - side + 1);
  const int y0 = rng.uniform_int(H - side + 1);

  s.image = resize_region(src, y0, x0, side, side, out, out);
  const double k = static_cast<double>(out) / side;
  for (const auto& a : anns) {
    Box b;
    b.x1 = std::clamp((a.box.x1 - x0) * k, 0.0, static_cast<double>(out));
    b.x2 = std::clamp((a.box.x2 - x0) * k, 0.0, static_cast<double>(out));
    b.y1 = std::clamp((a.box.y1 - y0) * k, 0.0, static_cast<double>(out));
    b.y2 = std::clamp((a.box.y2 - y0) * k, 0.0, static_cast<double>(out));
    if (b.width() < 2.0 || b.height() < 2.0) continue;  // cropped away
    s.boxes.push_back({b, a.class_id});
  }
  if (flip) flip_horizontal(s.image, s.boxes);
  return s;
}

}  // namespace

TrainResult train_model(Model<float>& model, const Dataset& ds,
                        const TrainConfig& tc, const DetectionLossConfig& lc,
                        const EvalConfig& ec, const std::string& run_dir) {
  validate(tc);
  const auto& ids = ds.split("train");
  require(!ids.empty(), "train split is empty");

  std::filesystem::create_directories(run_dir);
  std::ofstream log(run_dir + "/train_log.txt", std::ios::trunc);
  if (!log) throw IoError("cannot write " + run_dir + "/train_log.txt");

  const auto anchors = generate_anchors(tc.resize, tc.resize, model.cfg.anchors);
  Sgd<float> opt(model.params, static_cast<float>(tc.learning_rate),
                 static_cast<float>(tc.momentum),
                 static_cast<float>(tc.weight_decay));
  Rng rng(mix_seed(tc.seed, 7));

  std::unordered_map<std::string, Tensor<float>> cache;
  auto image_of = [&](const std::string& id) -> const Tensor<float>& {
    auto it = cache.find(id);
    if (it == cache.end()) it = cache.emplace(id, load_image(ds, id)).first;
    return it->second;
  };

  const bool has_val =
      ds.splits.count("val") > 0 && !ds.splits.at("val").empty();
  EvalConfig val_ec = ec;
  val_ec.split = "val";

  TrainResult res;
  std::vector<size_t> order(ids.size());
  std::iota(order.begin(), order.end(), size_t{0});

  long step = 0;
  char line[160];
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    shuffle_indices(order, rng);
    for (size_t begin = 0; begin < order.size();
         begin += static_cast<size_t>(tc.batch_size)) {
      const size_t end =
          std::min(begin + static_cast<size_t>(tc.batch_size), order.size());
      const int B = static_cast<int>(end - begin);

      std::vector<Sample> samples;
      samples.reserve(B);
      for (size_t i = begin; i < end; ++i) {
        const auto& id = ids[order[i]];
        samples.push_back(prepare(image_of(id), ds.boxes_of(id), tc, rng));
      }
      auto batch = Tensor<float>::grid(B, 3, tc.resize, tc.resize);
      std::vector<std::vector<Annotation>> truths(B);
      for (int b = 0; b < B; ++b) {
        for (int c = 0; c < 3; ++c)
          batch.plane(b, c) = samples[b].image.plane(0, c);
        truths[b] = std::move(samples[b].boxes);
      }

      Graph<float> g(true);
      auto f = model.forward(g, g.constant(std::move(batch)));
      LossReport report;
      Var loss = detection_loss(g, f.cls, f.reg, anchors, truths, lc, &report);
      if (!std::isfinite(report.total))
        throw DivergenceError("non-finite loss at step " +
                              std::to_string(step));

      model.params.zero_grad();
      g.backward(loss);
      opt.step(warmup_scale<float>(step, tc.warmup_steps));

      std::snprintf(line, sizeof(line),
                    "step %ld epoch %d loss %.6f conf %.6f loc %.6f pos %d",
                    step, epoch, report.total, report.conf, report.loc,
                    report.positives);
      log << line;
      if (f.reflect.valid()) {
        // observational only: how bright the derived reflectance runs
        std::snprintf(line, sizeof(line), " rmean %.4f",
                      static_cast<double>(g.val(f.reflect).m.mean()));
        log << line;
      }
      log << "\n";
      if (step == 0) res.first_loss = report.total;
      res.final_loss = report.total;
      ++step;
    }
    if (tc.eval_every > 0 && (epoch + 1) % tc.eval_every == 0 && has_val) {
      auto out = evaluate_model(model, ds, val_ec);
      res.val_map = out.result.map;
      std::snprintf(line, sizeof(line), "epoch %d val_map %.6f", epoch,
                    out.result.map);
      log << line << "\n";
    }
  }
  res.steps = static_cast<int>(step);

  CheckpointMeta meta;
  meta.epoch = tc.epochs;
  meta.config_echo = config_echo(model.cfg, tc, lc, ds.seed);
  res.checkpoint_path = run_dir + "/model.ckpt";
  save_checkpoint(res.checkpoint_path, model, meta);
  return res;
}

}  // namespace t2
