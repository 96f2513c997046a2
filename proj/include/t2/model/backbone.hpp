#pragma once

#include <array>
#include <string>

#include "t2/core/autodiff.hpp"
#include "t2/det/anchors.hpp"
#include "t2/nn/ops.hpp"
#include "t2/nn/params.hpp"

namespace t2 {

struct BackboneConfig {
  std::array<int, 8> widths = {16, 32, 64, 64, 96, 96, 128, 128};
  // Separate BN running statistics for the illumination and reflectance
  // streams. Default off: both streams update one shared set.
  bool per_stream_stats = false;
};

// Reduced VGG-style stack: eight blocks of two 3x3 Conv-BN-ReLU layers with
// a stride-2 max pool between blocks. One parameter set serves every input
// stream (weight sharing). Taps are the outputs of blocks 3..8, i.e. strides
// 4, 8, 16, 32, 64, 128.
template <class T>
struct Backbone {
  BackboneConfig cfg;
  struct Block {
    ConvLayer<T> c1, c2;
    BnLayer<T> b1, b2;
  };
  std::array<Block, 8> blocks;

  void init(const BackboneConfig& c, Rng& rng) {
    cfg = c;
    const int streams = cfg.per_stream_stats ? 2 : 1;
    int cin = 3;
    for (int i = 0; i < 8; ++i) {
      const int w = cfg.widths[i];
      const std::string base = "bb.b" + std::to_string(i + 1);
      blocks[i].c1.init(base + ".c1", w, cin, 3, rng);
      blocks[i].b1.init(base + ".bn1", w, streams);
      blocks[i].c2.init(base + ".c2", w, w, 3, rng);
      blocks[i].b2.init(base + ".bn2", w, streams);
      cin = w;
    }
  }

  void collect(ParamSet<T>& set) {
    for (auto& b : blocks) {
      b.c1.collect(set);
      b.b1.collect(set);
      b.c2.collect(set);
      b.b2.collect(set);
    }
  }

  void collect_buffers(std::vector<std::pair<std::string, Tensor<T>*>>& out) {
    for (auto& b : blocks) {
      b.b1.collect_buffers(out);
      b.b2.collect_buffers(out);
    }
  }

  std::array<int, 6> tap_widths() const {
    return {cfg.widths[2], cfg.widths[3], cfg.widths[4],
            cfg.widths[5], cfg.widths[6], cfg.widths[7]};
  }

  // stream: 0 = illumination / single-stream input, 1 = reflectance.
  // Collapses to one BN statistics set unless per_stream_stats is on.
  std::array<Var, 6> extract(Graph<T>& g, Var x, int stream = 0) {
    const auto& X = g.val(x);
    require(X.h % 128 == 0 && X.w % 128 == 0,
            "backbone input dims must be divisible by 128: " + X.shape_str());
    const int s = cfg.per_stream_stats ? stream : 0;
    std::array<Var, 6> taps;
    Var h = x;
    for (int i = 0; i < 8; ++i) {
      if (i > 0) h = maxpool2(g, h);
      h = conv_bn_relu(g, h, blocks[i].c1, blocks[i].b1, s);
      h = conv_bn_relu(g, h, blocks[i].c2, blocks[i].b2, s);
      if (i >= 2) taps[i - 2] = h;
    }
    return taps;
  }
};

}  // namespace t2
