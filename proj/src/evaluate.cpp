#include "t2/harness/evaluate.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace t2 {

namespace {

std::string class_label(int c) {
  return c < kSynthClasses ? synth_class_name(c) : "class" + std::to_string(c);
}

std::string fmt6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write " + path);
  return f;
}

}  // namespace

EvalOutcome evaluate_model(Model<float>& model, const Dataset& ds,
                           const EvalConfig& ec) {
  const auto& ids = ds.split(ec.split);
  require(!ids.empty(), "split '" + ec.split + "' is empty");
  require(ec.batch_size >= 1, "eval batch_size must be positive");

  EvalOutcome out;
  out.split = ec.split;
  out.num_images = static_cast<int>(ids.size());
  out.iou_threshold = ec.iou_threshold;

  std::vector<std::vector<Detection>> dets;
  std::vector<std::vector<Annotation>> truths;
  dets.reserve(ids.size());
  truths.reserve(ids.size());

  AnchorSet anchors;
  int anchor_h = -1, anchor_w = -1;
  const size_t stride = static_cast<size_t>(ec.batch_size);
  for (size_t begin = 0; begin < ids.size(); begin += stride) {
    const size_t end = std::min(begin + stride, ids.size());
    std::vector<Tensor<float>> images;
    for (size_t i = begin; i < end; ++i)
      images.push_back(load_image(ds, ids[i]));
    const int H = images[0].h, W = images[0].w;
    for (const auto& im : images)
      require(im.h == H && im.w == W, "eval batch mixes image sizes");
    if (H != anchor_h || W != anchor_w) {
      anchors = generate_anchors(H, W, model.cfg.anchors);
      anchor_h = H;
      anchor_w = W;
    }
    auto batch = Tensor<float>::grid(static_cast<int>(end - begin), 3, H, W);
    for (size_t i = begin; i < end; ++i)
      for (int c = 0; c < 3; ++c)
        batch.plane(static_cast<int>(i - begin), c) = images[i - begin].plane(0, c);

    Graph<float> g(false);
    auto f = model.forward(g, g.constant(std::move(batch)));
    auto decoded = decode_detections(g, f.cls, f.reg, anchors,
                                     model.cfg.num_classes, H, W, ec.detect);
    for (size_t i = begin; i < end; ++i) {
      dets.push_back(std::move(decoded[i - begin]));
      truths.push_back(ds.boxes_of(ids[i]));
    }
  }

  out.result = mean_ap(dets, truths, model.cfg.num_classes, ec.iou_threshold);
  for (int c = 0; c < model.cfg.num_classes; ++c) {
    std::vector<std::vector<Detection>> cd(dets.size());
    std::vector<std::vector<Box>> ct(truths.size());
    for (size_t im = 0; im < dets.size(); ++im) {
      for (const auto& d : dets[im])
        if (d.class_id == c) cd[im].push_back(d);
      for (const auto& a : truths[im])
        if (a.class_id == c) ct[im].push_back(a.box);
    }
    out.curves.push_back(pr_curve(cd, ct, ec.iou_threshold, c));
  }
  return out;
}

void write_report(const EvalOutcome& out, const std::string& dir) {
  std::filesystem::create_directories(dir);

  {
    auto f = open_out(dir + "/report.txt");
    f << "split " << out.split << "  images " << out.num_images
      << "  iou " << fmt6(out.iou_threshold) << "\n";
    for (size_t c = 0; c < out.result.per_class.size(); ++c) {
      const auto& ap = out.result.per_class[c];
      f << "class " << c << " " << class_label(static_cast<int>(c))
        << "  truths " << ap.num_truths << "  ap " << fmt6(ap.ap);
      if (ap.zero_truths) f << "  (no truths)";
      f << "\n";
    }
    f << "map " << fmt6(out.result.map) << "\n";
  }
  {
    auto f = open_out(dir + "/report.csv");
    f << "class,name,truths,ap\n";
    for (size_t c = 0; c < out.result.per_class.size(); ++c) {
      const auto& ap = out.result.per_class[c];
      f << c << "," << class_label(static_cast<int>(c)) << ","
        << ap.num_truths << "," << fmt6(ap.ap) << "\n";
    }
    f << "map,,," << fmt6(out.result.map) << "\n";
  }
  for (const auto& curve : out.curves) {
    auto f = open_out(dir + "/pr_" + class_label(curve.class_id) + ".csv");
    f << "threshold,recall,precision\n";
    for (const auto& p : curve.points)
      f << fmt6(p.threshold) << "," << fmt6(p.recall) << ","
        << fmt6(p.precision) << "\n";
  }
}

}  // namespace t2
