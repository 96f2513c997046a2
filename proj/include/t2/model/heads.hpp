#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "t2/core/autodiff.hpp"
#include "t2/nn/ops.hpp"
#include "t2/nn/params.hpp"

namespace t2 {

struct HeadConfig {
  int width = 64;  // common head input width
  int num_classes = 4;
  int num_ratios = 1;
  double bg_prior = 0.99;  // initial background probability of the class head
};

// Detection heads shared across all six levels: one 3x3 conv producing
// num_ratios*(num_classes+1) class logits per cell and one producing
// num_ratios*4 box offsets. Because tap widths differ across levels (and
// between raw-tap and aggregated variants), each level gets its own linear
// 1x1 adapter onto the shared width first.
template <class T>
struct Heads {
  HeadConfig cfg;
  std::array<ConvLayer<T>, 6> adapt;
  ConvLayer<T> cls;
  ConvLayer<T> reg;

  void init(const HeadConfig& c, const std::array<int, 6>& in_widths,
            Rng& rng) {
    cfg = c;
    for (int li = 0; li < 6; ++li)
      adapt[li].init("head.adapt" + std::to_string(li + 3), cfg.width,
                     in_widths[li], 1, rng);
    const int c1 = cfg.num_classes + 1;
    cls.init("head.cls", cfg.num_ratios * c1, cfg.width, 3, rng);
    reg.init("head.reg", cfg.num_ratios * 4, cfg.width, 3, rng);
    // bias the background logit so the initial loss is not dominated by the
    // sea of negative anchors
    const double p = cfg.bg_prior;
    const double b = std::log(p / (1.0 - p) * cfg.num_classes);
    for (int r = 0; r < cfg.num_ratios; ++r)
      cls.bias.value.m(r * c1 + cfg.num_classes, 0) = static_cast<T>(b);
  }

  void collect(ParamSet<T>& set) {
    for (auto& a : adapt) a.collect(set);
    cls.collect(set);
    reg.collect(set);
  }

  struct Out {
    std::vector<Var> cls, reg;  // six levels each
  };

  Out forward(Graph<T>& g, const std::array<Var, 6>& feats) {
    Out out;
    for (int li = 0; li < 6; ++li) {
      Var f = conv2d(g, feats[li], g.param(adapt[li].weight),
                     g.param(adapt[li].bias));
      out.cls.push_back(
          conv2d(g, f, g.param(cls.weight), g.param(cls.bias)));
      out.reg.push_back(
          conv2d(g, f, g.param(reg.weight), g.param(reg.bias)));
    }
    return out;
  }
};

}  // namespace t2
