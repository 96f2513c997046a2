#pragma once

#include <array>
#include <string>

#include "t2/core/autodiff.hpp"
#include "t2/nn/ops.hpp"
#include "t2/nn/params.hpp"

namespace t2 {

struct AggregatorConfig {
  int width = 64;                  // common channel width after aggregation
  bool two_stream = true;          // multiplicative fusion of two pyramids
  bool bilinear_upsample = false;  // nearest-neighbour by default
  bool identity_test_mode = false;  // bypass laterals and smoothing entirely
};

// Top-down fusion, built strictly from level 8 down to level 3:
//   out_8 = smooth(lat_i(t_8) * lat_r(t_8))
//   out_a = smooth(lat_i(t_a) * lat_r(t_a) + upsample2x(out_{a+1}))
// Laterals are plain 1x1 projections to a common width; smoothing is a 3x3
// Conv-BN-ReLU. The single-stream form drops the multiplication (one lateral
// per level, additive top-down only), used by the FPN-only ablations.
// Identity test mode skips laterals and smoothing so the recursion is
// assertable verbatim on hand-built pyramids.
template <class T>
struct Aggregator {
  AggregatorConfig cfg;
  std::array<ConvLayer<T>, 6> lat_i, lat_r;
  std::array<ConvLayer<T>, 6> smooth;
  std::array<BnLayer<T>, 6> smooth_bn;

  void init(const AggregatorConfig& c, const std::array<int, 6>& tap_widths,
            Rng& rng) {
    cfg = c;
    if (cfg.identity_test_mode) return;
    for (int li = 0; li < 6; ++li) {
      const std::string lvl = std::to_string(li + 3);
      if (cfg.two_stream)
        lat_i[li].init("agg.lat_i" + lvl, cfg.width, tap_widths[li], 1, rng);
      lat_r[li].init("agg.lat_r" + lvl, cfg.width, tap_widths[li], 1, rng);
      smooth[li].init("agg.smooth" + lvl, cfg.width, cfg.width, 3, rng);
      smooth_bn[li].init("agg.smooth_bn" + lvl, cfg.width);
    }
  }

  void collect(ParamSet<T>& set) {
    if (cfg.identity_test_mode) return;
    for (int li = 0; li < 6; ++li) {
      if (cfg.two_stream) lat_i[li].collect(set);
      lat_r[li].collect(set);
      smooth[li].collect(set);
      smooth_bn[li].collect(set);
    }
  }

  void collect_buffers(std::vector<std::pair<std::string, Tensor<T>*>>& out) {
    if (cfg.identity_test_mode) return;
    for (auto& bn : smooth_bn) bn.collect_buffers(out);
  }

  std::array<Var, 6> aggregate(Graph<T>& g, const std::array<Var, 6>& pyr_i,
                               const std::array<Var, 6>& pyr_r) {
    require(cfg.two_stream, "aggregate: configured single-stream");
    for (int li = 0; li < 6; ++li)
      require(g.val(pyr_i[li]).same_shape(g.val(pyr_r[li])),
              "aggregate: stream shape mismatch at level " +
                  std::to_string(li + 3) + ": " + g.val(pyr_i[li]).shape_str() +
                  " vs " + g.val(pyr_r[li]).shape_str());
    std::array<Var, 6> out;
    for (int li = 5; li >= 0; --li) {
      Var a = project(g, lat_i[li], pyr_i[li]);
      Var b = project(g, lat_r[li], pyr_r[li]);
      Var merged = mul(g, a, b);
      if (li < 5) merged = add(g, merged, up(g, out[li + 1]));
      out[li] = finish(g, li, merged);
    }
    return out;
  }

  std::array<Var, 6> aggregate_single(Graph<T>& g,
                                      const std::array<Var, 6>& pyr) {
    std::array<Var, 6> out;
    for (int li = 5; li >= 0; --li) {
      Var merged = project(g, lat_r[li], pyr[li]);
      if (li < 5) merged = add(g, merged, up(g, out[li + 1]));
      out[li] = finish(g, li, merged);
    }
    return out;
  }

 private:
  Var up(Graph<T>& g, Var x) {
    return cfg.bilinear_upsample ? upsample2_bilinear(g, x)
                                 : upsample2_nearest(g, x);
  }

  Var project(Graph<T>& g, ConvLayer<T>& lat, Var x) {
    if (cfg.identity_test_mode) return x;
    return conv2d(g, x, g.param(lat.weight), g.param(lat.bias));
  }

  Var finish(Graph<T>& g, int li, Var merged) {
    if (cfg.identity_test_mode) return merged;
    return conv_bn_relu(g, merged, smooth[li], smooth_bn[li]);
  }
};

}  // namespace t2
