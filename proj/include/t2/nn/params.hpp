#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "t2/core/rng.hpp"
#include "t2/core/tensor.hpp"

namespace t2 {

// A trainable array: value plus gradient and momentum slots owned by the
// parameter itself so the optimizer state travels with the model.
template <class T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  Tensor<T> momentum;
  bool decay = true;  // weight decay applies (off for biases and BN affine)

  void reset(const std::string& n, Tensor<T> v, bool wd = true) {
    name = n;
    value = std::move(v);
    grad = value.zeros_like();
    momentum = value.zeros_like();
    decay = wd;
  }

  void zero_grad() { grad.m.setZero(); }
};

// Registration order is the update order; keep it deterministic.
template <class T>
struct ParamSet {
  std::vector<Param<T>*> items;

  void add(Param<T>& p) { items.push_back(&p); }

  void zero_grad() {
    for (auto* p : items) p->zero_grad();
  }

  Eigen::Index count_scalars() const {
    Eigen::Index total = 0;
    for (auto* p : items) total += p->value.size();
    return total;
  }
};

template <class T>
struct ConvLayer {
  Param<T> weight;  // kernel tensor, GEMM form (cin*kh*kw) x cout
  Param<T> bias;    // cout x 1
  int pad = 0;

  void init(const std::string& name, int cout, int cin, int k, Rng& rng) {
    pad = k / 2;
    auto w = Tensor<T>::kernel(cout, cin, k, k);
    // He fan-in init, matching the ReLU stacks this feeds.
    double stddev = std::sqrt(2.0 / (static_cast<double>(cin) * k * k));
    for (Eigen::Index i = 0; i < w.m.size(); ++i)
      w.m.data()[i] = static_cast<T>(rng.normal(0.0, stddev));
    weight.reset(name + ".w", std::move(w), true);
    bias.reset(name + ".b", Tensor<T>::vec(cout), false);
  }

  void collect(ParamSet<T>& set) {
    set.add(weight);
    set.add(bias);
  }
};

// Batch norm: gamma/beta are trained, the running statistics are plain
// buffers updated during training forward passes. `running(stream)` lets a
// weight-shared backbone keep separate inference statistics per input
// stream when configured to.
template <class T>
struct BnLayer {
  Param<T> gamma;
  Param<T> beta;
  std::vector<Tensor<T>> run_mean;  // one entry per stream
  std::vector<Tensor<T>> run_var;
  T momentum = static_cast<T>(0.1);
  T eps = static_cast<T>(1e-5);

  void init(const std::string& name, int channels, int streams = 1) {
    auto g = Tensor<T>::vec(channels);
    g.m.setOnes();
    gamma.reset(name + ".gamma", std::move(g), false);
    beta.reset(name + ".beta", Tensor<T>::vec(channels), false);
    run_mean.assign(streams, Tensor<T>::vec(channels));
    run_var.clear();
    for (int s = 0; s < streams; ++s) {
      auto v = Tensor<T>::vec(channels);
      v.m.setOnes();
      run_var.push_back(std::move(v));
    }
  }

  void collect(ParamSet<T>& set) {
    set.add(gamma);
    set.add(beta);
  }

  // running statistics are not trained but must survive checkpointing
  void collect_buffers(std::vector<std::pair<std::string, Tensor<T>*>>& out) {
    const std::string base = gamma.name.substr(0, gamma.name.size() - 6);
    for (int s = 0; s < streams(); ++s) {
      out.emplace_back(base + ".run_mean" + std::to_string(s), &run_mean[s]);
      out.emplace_back(base + ".run_var" + std::to_string(s), &run_var[s]);
    }
  }

  int streams() const { return static_cast<int>(run_mean.size()); }
};

}  // namespace t2
