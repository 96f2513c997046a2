#pragma once

#include <string>
#include <utility>
#include <vector>

#include "t2/core/rng.hpp"
#include "t2/det/anchors.hpp"
#include "t2/det/detection_loss.hpp"
#include "t2/evalkit.hpp"
#include "t2/model/aggregator.hpp"
#include "t2/model/backbone.hpp"
#include "t2/model/heads.hpp"
#include "t2/model/sdm.hpp"

namespace t2 {

// The six ablation variants:
//   A  raw backbone taps of the dark image, no decomposition, no fusion
//   B  dark image through the additive top-down pyramid
//   C  raw taps of the predicted illumination
//   D  raw taps of the derived reflectance
//   E  reflectance through the additive top-down pyramid
//   T2 full decomposition with multiplicative two-stream aggregation
enum class Variant { A, B, C, D, E, T2 };

inline Variant parse_variant(const std::string& s) {
  if (s == "A") return Variant::A;
  if (s == "B") return Variant::B;
  if (s == "C") return Variant::C;
  if (s == "D") return Variant::D;
  if (s == "E") return Variant::E;
  if (s == "T2") return Variant::T2;
  throw ValidationError("unknown variant tag '" + s +
                        "' (expected A|B|C|D|E|T2)");
}

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::A: return "A";
    case Variant::B: return "B";
    case Variant::C: return "C";
    case Variant::D: return "D";
    case Variant::E: return "E";
    default: return "T2";
  }
}

inline bool variant_uses_sdm(Variant v) {
  return v == Variant::C || v == Variant::D || v == Variant::E ||
         v == Variant::T2;
}

inline bool variant_uses_pyramid(Variant v) {
  return v == Variant::B || v == Variant::E || v == Variant::T2;
}

struct ModelConfig {
  std::string variant = "T2";
  int num_classes = 4;
  SdmConfig sdm;
  BackboneConfig backbone;
  AggregatorConfig aggregator;
  AnchorConfig anchors;
  double head_bg_prior = 0.99;
};

template <class T>
struct Model {
  ModelConfig cfg;
  Variant variant = Variant::T2;
  Sdm<T> sdm;
  Backbone<T> backbone;
  Aggregator<T> agg;
  Heads<T> heads;
  ParamSet<T> params;  // fixed registration order: sdm, backbone, agg, heads

  void init(const ModelConfig& c, uint64_t seed) {
    cfg = c;
    variant = parse_variant(cfg.variant);
    params.items.clear();
    if (variant_uses_sdm(variant)) {
      Rng rng(mix_seed(seed, 101));
      sdm.init(cfg.sdm, rng);
      sdm.collect(params);
    }
    {
      Rng rng(mix_seed(seed, 102));
      backbone.init(cfg.backbone, rng);
      backbone.collect(params);
    }
    if (variant_uses_pyramid(variant)) {
      Rng rng(mix_seed(seed, 103));
      AggregatorConfig ac = cfg.aggregator;
      ac.two_stream = variant == Variant::T2;
      ac.identity_test_mode = false;
      agg.init(ac, backbone.tap_widths(), rng);
      agg.collect(params);
    }
    {
      Rng rng(mix_seed(seed, 104));
      HeadConfig hc;
      hc.width = cfg.aggregator.width;
      hc.num_classes = cfg.num_classes;
      hc.num_ratios = static_cast<int>(cfg.anchors.ratios.size());
      hc.bg_prior = cfg.head_bg_prior;
      const auto in_widths = variant_uses_pyramid(variant)
                                 ? std::array<int, 6>{hc.width, hc.width,
                                                      hc.width, hc.width,
                                                      hc.width, hc.width}
                                 : backbone.tap_widths();
      heads.init(hc, in_widths, rng);
      heads.collect(params);
    }
  }

  // BN running statistics, fixed order matching init
  std::vector<std::pair<std::string, Tensor<T>*>> buffers() {
    std::vector<std::pair<std::string, Tensor<T>*>> out;
    if (variant_uses_sdm(variant)) sdm.collect_buffers(out);
    backbone.collect_buffers(out);
    if (variant_uses_pyramid(variant)) agg.collect_buffers(out);
    return out;
  }

  struct Forward {
    std::vector<Var> cls, reg;
    Var illum{}, reflect{};  // valid iff the variant decomposes
  };

  Forward forward(Graph<T>& g, Var image) {
    check_image_batch(g.val(image));
    Forward out;
    std::array<Var, 6> feats;
    switch (variant) {
      case Variant::A:
        feats = backbone.extract(g, image, 0);
        break;
      case Variant::B:
        feats = agg.aggregate_single(g, backbone.extract(g, image, 0));
        break;
      case Variant::C: {
        auto d = sdm.decompose(g, image);
        out.illum = d.illum;
        out.reflect = d.reflect;
        feats = backbone.extract(g, d.illum, 0);
        break;
      }
      case Variant::D: {
        auto d = sdm.decompose(g, image);
        out.illum = d.illum;
        out.reflect = d.reflect;
        feats = backbone.extract(g, d.reflect, 1);
        break;
      }
      case Variant::E: {
        auto d = sdm.decompose(g, image);
        out.illum = d.illum;
        out.reflect = d.reflect;
        feats = agg.aggregate_single(g, backbone.extract(g, d.reflect, 1));
        break;
      }
      case Variant::T2: {
        auto d = sdm.decompose(g, image);
        out.illum = d.illum;
        out.reflect = d.reflect;
        auto ti = backbone.extract(g, d.illum, 0);
        auto tr = backbone.extract(g, d.reflect, 1);
        feats = agg.aggregate(g, ti, tr);
        break;
      }
    }
    auto h = heads.forward(g, feats);
    out.cls = std::move(h.cls);
    out.reg = std::move(h.reg);
    return out;
  }
};

struct DetectConfig {
  double score_threshold = 0.05;
  double nms_overlap = 0.3;
  int nms_keep_top = 750;
  BoxCoding coding;
};

// Turns raw head outputs into per-image, NMS-filtered detections. Scores are
// softmax probabilities; boxes are decoded against the anchors, clipped to
// the image, and degenerate results dropped.
template <class T>
std::vector<std::vector<Detection>> decode_detections(
    const Graph<T>& g, const std::vector<Var>& cls, const std::vector<Var>& reg,
    const AnchorSet& anchors, int num_classes, int image_h, int image_w,
    const DetectConfig& dc) {
  const int B = g.val(cls[0]).n;
  const int C1 = num_classes + 1;
  const int R = anchors.num_ratios;
  std::vector<std::vector<Detection>> result(B);
  std::vector<double> z(C1), p(C1);
  for (int n = 0; n < B; ++n) {
    // candidates per class, then per-class suppression
    std::vector<std::vector<Detection>> cand(num_classes);
    for (int li = 0; li < 6; ++li) {
      const auto& cv = g.val(cls[li]);
      const auto& rv = g.val(reg[li]);
      for (int y = 0; y < anchors.grid_h[li]; ++y)
        for (int x = 0; x < anchors.grid_w[li]; ++x)
          for (int r = 0; r < R; ++r) {
            const Eigen::Index a = anchors.index(li, y, x, r);
            for (int c = 0; c < C1; ++c)
              z[c] = static_cast<double>(cv.at(n, r * C1 + c, y, x));
            softmax_row(z.data(), C1, p.data());
            for (int c = 0; c < num_classes; ++c) {
              if (p[c] < dc.score_threshold) continue;
              std::array<double, 4> t;
              for (int j = 0; j < 4; ++j)
                t[j] = static_cast<double>(rv.at(n, r * 4 + j, y, x));
              Box b = decode(t, anchors.boxes[a], dc.coding);
              b.x1 = std::max(0.0, std::min(b.x1, double(image_w)));
              b.x2 = std::max(0.0, std::min(b.x2, double(image_w)));
              b.y1 = std::max(0.0, std::min(b.y1, double(image_h)));
              b.y2 = std::max(0.0, std::min(b.y2, double(image_h)));
              if (!(b.x1 < b.x2 && b.y1 < b.y2)) continue;
              cand[c].push_back({b, c, p[c]});
            }
          }
    }
    for (int c = 0; c < num_classes; ++c) {
      auto kept = nms(cand[c], dc.nms_overlap, dc.nms_keep_top);
      result[n].insert(result[n].end(), kept.begin(), kept.end());
    }
  }
  return result;
}

}  // namespace t2
