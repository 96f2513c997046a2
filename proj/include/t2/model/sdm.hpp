#pragma once

#include <string>
#include <utility>

#include "t2/core/autodiff.hpp"
#include "t2/nn/ops.hpp"
#include "t2/nn/params.hpp"

namespace t2 {

struct SdmConfig {
  int width = 32;          // internal channel width
  double eps_illum = 1e-4;  // lower bound of predicted illumination
};

// Batched image check used at the pipeline boundary. The pyramid arithmetic
// needs dims divisible by 128; module-level tests may relax that.
template <class T>
void check_image_batch(const Tensor<T>& t, bool strict_dims = true) {
  require(t.c == 3, "image batch must have 3 channels, got " + t.shape_str());
  require(t.all_finite(), "image batch contains non-finite values");
  require(t.m.minCoeff() >= static_cast<T>(0) &&
              t.m.maxCoeff() <= static_cast<T>(1),
          "image values outside [0,1]");
  require(t.h >= 32 && t.w >= 32, "image smaller than 32x32: " + t.shape_str());
  if (strict_dims)
    require(t.h % 128 == 0 && t.w % 128 == 0,
            "image dims must be divisible by 128: " + t.shape_str());
}

// Residual decomposition network. Predicts only the illumination map; the
// reflectance is the exact elementwise quotient, so the product of the two
// outputs reproduces the input by construction. No loss ever attaches here;
// gradients arrive exclusively through the detector.
template <class T>
struct Sdm {
  SdmConfig cfg;
  ConvLayer<T> adapt_in;  // 1x1, 3 -> width
  BnLayer<T> bn_in;
  struct Block {
    ConvLayer<T> c1, c2;
    BnLayer<T> b1, b2;
  };
  std::array<Block, 3> blocks;
  ConvLayer<T> adapt_out;  // 1x1, width -> 3, raw logits

  void init(const SdmConfig& c, Rng& rng) {
    cfg = c;
    adapt_in.init("sdm.in", cfg.width, 3, 1, rng);
    bn_in.init("sdm.in_bn", cfg.width);
    for (int i = 0; i < 3; ++i) {
      const std::string base = "sdm.res" + std::to_string(i);
      blocks[i].c1.init(base + ".c1", cfg.width, cfg.width, 3, rng);
      blocks[i].b1.init(base + ".bn1", cfg.width);
      blocks[i].c2.init(base + ".c2", cfg.width, cfg.width, 3, rng);
      blocks[i].b2.init(base + ".bn2", cfg.width);
    }
    adapt_out.init("sdm.out", 3, cfg.width, 1, rng);
  }

  void collect(ParamSet<T>& set) {
    adapt_in.collect(set);
    bn_in.collect(set);
    for (auto& b : blocks) {
      b.c1.collect(set);
      b.b1.collect(set);
      b.c2.collect(set);
      b.b2.collect(set);
    }
    adapt_out.collect(set);
  }

  void collect_buffers(std::vector<std::pair<std::string, Tensor<T>*>>& out) {
    bn_in.collect_buffers(out);
    for (auto& b : blocks) {
      b.b1.collect_buffers(out);
      b.b2.collect_buffers(out);
    }
  }

  struct Out {
    Var illum, reflect;
  };

  Out decompose(Graph<T>& g, Var low_light) {
    Var h = conv_bn_relu(g, low_light, adapt_in, bn_in);
    for (auto& b : blocks) {
      Var y = conv_bn_relu(g, h, b.c1, b.b1);
      y = conv_bn_relu(g, y, b.c2, b.b2);
      h = add(g, y, h);
    }
    Var logits =
        conv2d(g, h, g.param(adapt_out.weight), g.param(adapt_out.bias));
    Var illum = sigmoid_floor(g, logits, static_cast<T>(cfg.eps_illum));
    Var reflect = div(g, low_light, illum);
    return {illum, reflect};
  }
};

// Decomposition from an externally supplied illumination map (precomputed by
// some other enhancer and stored on disk). Values must already live in
// (0, 1]; anything below eps is raised to eps before the division.
template <class T>
std::pair<Tensor<T>, Tensor<T>> decompose_with_illumination(
    const Tensor<T>& low_light, Tensor<T> illum, double eps_illum = 1e-4) {
  require(illum.same_shape(low_light),
          "external illumination shape " + illum.shape_str() +
              " does not match image " + low_light.shape_str());
  require(illum.all_finite(), "external illumination has non-finite values");
  const double lo = static_cast<double>(illum.m.minCoeff());
  const double hi = static_cast<double>(illum.m.maxCoeff());
  require(lo > 0.0 && hi <= 1.0,
          "external illumination outside (0,1]: range [" + std::to_string(lo) +
              ", " + std::to_string(hi) + "]");
  illum.m = illum.m.cwiseMax(static_cast<T>(eps_illum));
  Tensor<T> reflect = low_light;
  reflect.m.array() /= illum.m.array();
  return {std::move(illum), std::move(reflect)};
}

}  // namespace t2
