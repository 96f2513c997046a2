#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <vector>

#include "t2/core/autodiff.hpp"
#include "t2/core/tensor.hpp"
#include "t2/nn/params.hpp"

namespace t2 {

namespace detail {

// Grow-only scratch backing the im2col buffers so the per-step hot loop does
// not churn the allocator. Two independent slots: conv backward needs the
// re-materialized input columns and the gradient columns alive at once.
template <class T>
struct Scratch {
  std::vector<T, Eigen::aligned_allocator<T>> buf;

  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>> mat(
      Eigen::Index rows, Eigen::Index cols) {
    if (static_cast<Eigen::Index>(buf.size()) < rows * cols)
      buf.resize(rows * cols);
    return {buf.data(), rows, cols};
  }
};

template <class T>
Scratch<T>& scratch_a() {
  static thread_local Scratch<T> s;
  return s;
}

template <class T>
Scratch<T>& scratch_b() {
  static thread_local Scratch<T> s;
  return s;
}

// Stride-1 same-size lowering: cols(r, (cin*k+ky)*k+kx) = x[cin] shifted by
// (ky-pad, kx-pad), zero outside. Column-major, so each (n, y) slab is one
// contiguous segment copy.
template <class T, class Mat>
void im2col(const Tensor<T>& x, int k, int pad, Mat cols) {
  const int N = x.n, C = x.c, H = x.h, W = x.w;
  for (int cin = 0; cin < C; ++cin) {
    const auto src = x.m.col(cin);
    for (int ky = 0; ky < k; ++ky) {
      const int dy = ky - pad;
      for (int kx = 0; kx < k; ++kx) {
        const int dx = kx - pad;
        auto dst = cols.col((cin * k + ky) * k + kx);
        const int xlo = std::max(0, -dx);
        const int xhi = std::min(W, W - dx);
        for (int n = 0; n < N; ++n) {
          for (int y = 0; y < H; ++y) {
            const Eigen::Index out0 = (static_cast<Eigen::Index>(n) * H + y) * W;
            const int ys = y + dy;
            if (ys < 0 || ys >= H || xlo >= xhi) {
              dst.segment(out0, W).setZero();
              continue;
            }
            if (xlo > 0) dst.segment(out0, xlo).setZero();
            if (xhi < W) dst.segment(out0 + xhi, W - xhi).setZero();
            dst.segment(out0 + xlo, xhi - xlo) =
                src.segment((static_cast<Eigen::Index>(n) * H + ys) * W + xlo + dx,
                            xhi - xlo);
          }
        }
      }
    }
  }
}

// Transpose of im2col: scatter-add column gradients back onto the input.
template <class T, class Mat>
void col2im_add(const Mat& dcols, int k, int pad, Tensor<T>& dx) {
  const int N = dx.n, C = dx.c, H = dx.h, W = dx.w;
  for (int cin = 0; cin < C; ++cin) {
    auto dst = dx.m.col(cin);
    for (int ky = 0; ky < k; ++ky) {
      const int dy = ky - pad;
      for (int kx = 0; kx < k; ++kx) {
        const int dx_ = kx - pad;
        const auto src = dcols.col((cin * k + ky) * k + kx);
        const int xlo = std::max(0, -dx_);
        const int xhi = std::min(W, W - dx_);
        if (xlo >= xhi) continue;
        for (int n = 0; n < N; ++n) {
          for (int y = 0; y < H; ++y) {
            const int ys = y + dy;
            if (ys < 0 || ys >= H) continue;
            dst.segment((static_cast<Eigen::Index>(n) * H + ys) * W + xlo + dx_,
                        xhi - xlo) +=
                src.segment((static_cast<Eigen::Index>(n) * H + y) * W + xlo,
                            xhi - xlo);
          }
        }
      }
    }
  }
}

}  // namespace detail

// y = conv(x, w) + b, stride 1, square kernel, zero padding k/2 so spatial
// dims are preserved. 1x1 kernels skip the lowering entirely.
template <class T>
Var conv2d(Graph<T>& g, Var x, Var w, Var b) {
  const Tensor<T>& X = g.val(x);
  const Tensor<T>& W = g.val(w);
  const Tensor<T>& B = g.val(b);
  const int k = W.h;
  require(W.w == k, "conv2d: kernel must be square");
  require(W.c == X.c, "conv2d: kernel cin " + std::to_string(W.c) +
                          " != input channels " + std::to_string(X.c));
  const int pad = (k - 1) / 2;
  require(2 * pad == k - 1, "conv2d: even kernel size unsupported");

  Tensor<T> Y = Tensor<T>::grid(X.n, W.n, X.h, X.w);
  if (k == 1) {
    Y.m.noalias() = X.m * W.m;
  } else {
    auto cols = detail::scratch_a<T>().mat(X.m.rows(), W.m.rows());
    detail::im2col(X, k, pad, cols);
    Y.m.noalias() = cols * W.m;
  }
  Y.m.rowwise() += B.m.col(0).transpose();

  bool ng = g.any_needs_grad({x, w, b});
  return g.push(std::move(Y), ng, {x, w, b}, [x, w, b, k, pad](Graph<T>& gr, Var out) {
    const Tensor<T>& dY = gr.grad(out);
    const Tensor<T>& Xv = gr.val(x);
    const Tensor<T>& Wv = gr.val(w);
    if (gr.needs_grad(b))
      gr.grad(b).m.col(0) += dY.m.colwise().sum().transpose();
    if (gr.needs_grad(w)) {
      if (k == 1) {
        gr.grad(w).m.noalias() += Xv.m.transpose() * dY.m;
      } else {
        auto cols = detail::scratch_a<T>().mat(Xv.m.rows(), Wv.m.rows());
        detail::im2col(Xv, k, pad, cols);
        gr.grad(w).m.noalias() += cols.transpose() * dY.m;
      }
    }
    if (gr.needs_grad(x)) {
      if (k == 1) {
        gr.grad(x).m.noalias() += dY.m * Wv.m.transpose();
      } else {
        auto dcols = detail::scratch_b<T>().mat(Xv.m.rows(), Wv.m.rows());
        dcols.noalias() = dY.m * Wv.m.transpose();
        detail::col2im_add(dcols, k, pad, gr.grad(x));
      }
    }
  });
}

// Batch norm over (n, h, w) per channel. Training mode normalizes with batch
// statistics and refreshes the running buffers of `stream`; inference mode
// is a fixed affine map from the running buffers.
template <class T>
Var batch_norm(Graph<T>& g, Var x, BnLayer<T>& bn, int stream = 0) {
  Var gv = g.param(bn.gamma);
  Var bv = g.param(bn.beta);
  const Tensor<T>& X = g.val(x);
  const int C = X.c;
  require(bn.gamma.value.c == C, "batch_norm: channel mismatch");
  require(stream >= 0 && stream < bn.streams(), "batch_norm: bad stream");

  Tensor<T> Y = X.zeros_like();
  if (!g.training()) {
    const auto& rm = bn.run_mean[stream].m;
    const auto& rv = bn.run_var[stream].m;
    for (int c = 0; c < C; ++c) {
      const T inv = static_cast<T>(1) / std::sqrt(rv(c, 0) + bn.eps);
      Y.m.col(c) = (X.m.col(c).array() - rm(c, 0)) * inv * g.val(gv).m(c, 0) +
                   g.val(bv).m(c, 0);
    }
    return g.push(std::move(Y), false, {}, nullptr);
  }

  const Eigen::Index rows = X.m.rows();
  auto saved = std::make_shared<Tensor<T>>();  // xhat
  *saved = X.zeros_like();
  auto invstd = std::make_shared<Eigen::Matrix<T, Eigen::Dynamic, 1>>(C);
  for (int c = 0; c < C; ++c) {
    const T mu = X.m.col(c).mean();
    const T var = (X.m.col(c).array() - mu).square().sum() / static_cast<T>(rows);
    const T inv = static_cast<T>(1) / std::sqrt(var + bn.eps);
    (*invstd)(c) = inv;
    saved->m.col(c) = (X.m.col(c).array() - mu) * inv;
    Y.m.col(c) = saved->m.col(c).array() * g.val(gv).m(c, 0) + g.val(bv).m(c, 0);
    bn.run_mean[stream].m(c, 0) =
        (static_cast<T>(1) - bn.momentum) * bn.run_mean[stream].m(c, 0) + bn.momentum * mu;
    bn.run_var[stream].m(c, 0) =
        (static_cast<T>(1) - bn.momentum) * bn.run_var[stream].m(c, 0) + bn.momentum * var;
  }

  bool ng = g.any_needs_grad({x, gv, bv});
  return g.push(std::move(Y), ng, {x, gv, bv},
                [x, gv, bv, saved, invstd](Graph<T>& gr, Var out) {
    const Tensor<T>& dY = gr.grad(out);
    const Tensor<T>& xhat = *saved;
    const Eigen::Index m = dY.m.rows();
    for (int c = 0; c < dY.c; ++c) {
      const T sum_dy = dY.m.col(c).sum();
      const T sum_dy_xhat = dY.m.col(c).dot(xhat.m.col(c));
      if (gr.needs_grad(bv)) gr.grad(bv).m(c, 0) += sum_dy;
      if (gr.needs_grad(gv)) gr.grad(gv).m(c, 0) += sum_dy_xhat;
      if (gr.needs_grad(x)) {
        const T gamma = gr.val(gv).m(c, 0);
        const T scale = gamma * (*invstd)(c) / static_cast<T>(m);
        gr.grad(x).m.col(c).array() +=
            scale * (static_cast<T>(m) * dY.m.col(c).array() - sum_dy -
                     xhat.m.col(c).array() * sum_dy_xhat);
      }
    }
  });
}

template <class T>
Var relu(Graph<T>& g, Var x) {
  Tensor<T> Y = g.val(x);
  Y.m = Y.m.cwiseMax(static_cast<T>(0));
  return g.push(std::move(Y), g.needs_grad(x), {x}, [x](Graph<T>& gr, Var out) {
    gr.grad(x).m.array() +=
        (gr.val(out).m.array() > static_cast<T>(0)).template cast<T>() *
        gr.grad(out).m.array();
  });
}

// 2x2 stride-2 max pool. Ties resolve to the first window cell in
// (dy, dx) scan order, which keeps backward deterministic.
template <class T>
Var maxpool2(Graph<T>& g, Var x) {
  const Tensor<T>& X = g.val(x);
  require(X.h % 2 == 0 && X.w % 2 == 0, "maxpool2: odd spatial dims");
  const int N = X.n, C = X.c, Ho = X.h / 2, Wo = X.w / 2;
  Tensor<T> Y = Tensor<T>::grid(N, C, Ho, Wo);
  auto arg = std::make_shared<std::vector<uint8_t>>(
      static_cast<size_t>(Y.m.rows()) * C);
  for (int c = 0; c < C; ++c) {
    const auto src = X.m.col(c);
    auto dst = Y.m.col(c);
    for (int n = 0; n < N; ++n) {
      for (int yo = 0; yo < Ho; ++yo) {
        const Eigen::Index i0 = (static_cast<Eigen::Index>(n) * X.h + 2 * yo) * X.w;
        const Eigen::Index o0 = (static_cast<Eigen::Index>(n) * Ho + yo) * Wo;
        for (int xo = 0; xo < Wo; ++xo) {
          const Eigen::Index base = i0 + 2 * xo;
          T best = src(base);
          uint8_t bi = 0;
          const T cands[3] = {src(base + 1), src(base + X.w), src(base + X.w + 1)};
          for (uint8_t j = 0; j < 3; ++j) {
            if (cands[j] > best) {
              best = cands[j];
              bi = static_cast<uint8_t>(j + 1);
            }
          }
          dst(o0 + xo) = best;
          (*arg)[static_cast<size_t>(c) * Y.m.rows() + o0 + xo] = bi;
        }
      }
    }
  }
  return g.push(std::move(Y), g.needs_grad(x), {x}, [x, arg](Graph<T>& gr, Var out) {
    const Tensor<T>& dY = gr.grad(out);
    Tensor<T>& dX = gr.grad(x);
    const int N = dX.n, C = dX.c, H = dX.h, W = dX.w;
    const int Ho = dY.h, Wo = dY.w;
    for (int c = 0; c < C; ++c) {
      const auto sdy = dY.m.col(c);
      auto sdx = dX.m.col(c);
      for (int n = 0; n < N; ++n) {
        for (int yo = 0; yo < Ho; ++yo) {
          const Eigen::Index i0 = (static_cast<Eigen::Index>(n) * H + 2 * yo) * W;
          const Eigen::Index o0 = (static_cast<Eigen::Index>(n) * Ho + yo) * Wo;
          for (int xo = 0; xo < Wo; ++xo) {
            const uint8_t bi = (*arg)[static_cast<size_t>(c) * dY.m.rows() + o0 + xo];
            const Eigen::Index off = (bi & 1) + (bi >> 1) * W;
            sdx(i0 + 2 * xo + off) += sdy(o0 + xo);
          }
        }
      }
    }
  });
}

// Nearest-neighbour 2x duplication in both spatial dims.
template <class T>
Var upsample2_nearest(Graph<T>& g, Var x) {
  const Tensor<T>& X = g.val(x);
  const int N = X.n, C = X.c, H = X.h, W = X.w;
  Tensor<T> Y = Tensor<T>::grid(N, C, 2 * H, 2 * W);
  for (int c = 0; c < C; ++c) {
    const auto src = X.m.col(c);
    auto dst = Y.m.col(c);
    for (int n = 0; n < N; ++n) {
      for (int y = 0; y < H; ++y) {
        const Eigen::Index i0 = (static_cast<Eigen::Index>(n) * H + y) * W;
        for (int r = 0; r < 2; ++r) {
          const Eigen::Index o0 =
              (static_cast<Eigen::Index>(n) * 2 * H + 2 * y + r) * 2 * W;
          for (int xx = 0; xx < W; ++xx) {
            const T v = src(i0 + xx);
            dst(o0 + 2 * xx) = v;
            dst(o0 + 2 * xx + 1) = v;
          }
        }
      }
    }
  }
  return g.push(std::move(Y), g.needs_grad(x), {x}, [x](Graph<T>& gr, Var out) {
    const Tensor<T>& dY = gr.grad(out);
    Tensor<T>& dX = gr.grad(x);
    const int N = dX.n, C = dX.c, H = dX.h, W = dX.w;
    for (int c = 0; c < C; ++c) {
      const auto sdy = dY.m.col(c);
      auto sdx = dX.m.col(c);
      for (int n = 0; n < N; ++n) {
        for (int y = 0; y < H; ++y) {
          const Eigen::Index i0 = (static_cast<Eigen::Index>(n) * H + y) * W;
          for (int r = 0; r < 2; ++r) {
            const Eigen::Index o0 =
                (static_cast<Eigen::Index>(n) * 2 * H + 2 * y + r) * 2 * W;
            for (int xx = 0; xx < W; ++xx)
              sdx(i0 + xx) += sdy(o0 + 2 * xx) + sdy(o0 + 2 * xx + 1);
          }
        }
      }
    }
  });
}

namespace detail {

// half-pixel-aligned source taps for 2x bilinear scaling
inline void bilinear_taps(int out, int in, int o, int& i0, int& i1, double& w1) {
  const double s = (o + 0.5) * in / static_cast<double>(out) - 0.5;
  const double f = std::floor(s);
  i0 = std::max(0, std::min(in - 1, static_cast<int>(f)));
  i1 = std::max(0, std::min(in - 1, static_cast<int>(f) + 1));
  w1 = s - f;
  if (static_cast<int>(f) < 0) w1 = 0.0;
  if (static_cast<int>(f) + 1 > in - 1) w1 = 0.0;
}

}  // namespace detail

// Optional alternative to the nearest-neighbour upsample (config switch).
template <class T>
Var upsample2_bilinear(Graph<T>& g, Var x) {
  const Tensor<T>& X = g.val(x);
  const int N = X.n, C = X.c, H = X.h, W = X.w;
  const int Ho = 2 * H, Wo = 2 * W;
  struct Tap {
    int a, b;
    T wb;
  };
  auto ytap = std::make_shared<std::vector<Tap>>(Ho);
  auto xtap = std::make_shared<std::vector<Tap>>(Wo);
  for (int y = 0; y < Ho; ++y) {
    int a, b;
    double wb;
    detail::bilinear_taps(Ho, H, y, a, b, wb);
    (*ytap)[y] = {a, b, static_cast<T>(wb)};
  }
  for (int xx = 0; xx < Wo; ++xx) {
    int a, b;
    double wb;
    detail::bilinear_taps(Wo, W, xx, a, b, wb);
    (*xtap)[xx] = {a, b, static_cast<T>(wb)};
  }
  Tensor<T> Y = Tensor<T>::grid(N, C, Ho, Wo);
  for (int c = 0; c < C; ++c) {
    const auto src = X.m.col(c);
    auto dst = Y.m.col(c);
    for (int n = 0; n < N; ++n) {
      for (int y = 0; y < Ho; ++y) {
        const Tap ty = (*ytap)[y];
        const Eigen::Index ra = (static_cast<Eigen::Index>(n) * H + ty.a) * W;
        const Eigen::Index rb = (static_cast<Eigen::Index>(n) * H + ty.b) * W;
        const Eigen::Index o0 = (static_cast<Eigen::Index>(n) * Ho + y) * Wo;
        for (int xx = 0; xx < Wo; ++xx) {
          const Tap tx = (*xtap)[xx];
          const T top = src(ra + tx.a) * (1 - tx.wb) + src(ra + tx.b) * tx.wb;
          const T bot = src(rb + tx.a) * (1 - tx.wb) + src(rb + tx.b) * tx.wb;
          dst(o0 + xx) = top * (1 - ty.wb) + bot * ty.wb;
        }
      }
    }
  }
  return g.push(std::move(Y), g.needs_grad(x), {x},
                [x, ytap, xtap](Graph<T>& gr, Var out) {
    const Tensor<T>& dY = gr.grad(out);
    Tensor<T>& dX = gr.grad(x);
    const int N = dX.n, C = dX.c, H = dX.h, W = dX.w;
    const int Ho = dY.h, Wo = dY.w;
    for (int c = 0; c < C; ++c) {
      const auto sdy = dY.m.col(c);
      auto sdx = dX.m.col(c);
      for (int n = 0; n < N; ++n) {
        for (int y = 0; y < Ho; ++y) {
          const auto ty = (*ytap)[y];
          const Eigen::Index ra = (static_cast<Eigen::Index>(n) * H + ty.a) * W;
          const Eigen::Index rb = (static_cast<Eigen::Index>(n) * H + ty.b) * W;
          const Eigen::Index o0 = (static_cast<Eigen::Index>(n) * Ho + y) * Wo;
          for (int xx = 0; xx < Wo; ++xx) {
            const auto tx = (*xtap)[xx];
            const T go = sdy(o0 + xx);
            sdx(ra + tx.a) += go * (1 - ty.wb) * (1 - tx.wb);
            sdx(ra + tx.b) += go * (1 - ty.wb) * tx.wb;
            sdx(rb + tx.a) += go * ty.wb * (1 - tx.wb);
            sdx(rb + tx.b) += go * ty.wb * tx.wb;
          }
        }
      }
    }
  });
}

template <class T>
Var add(Graph<T>& g, Var a, Var b) {
  require(g.val(a).same_shape(g.val(b)), "add: shape mismatch " +
              g.val(a).shape_str() + " vs " + g.val(b).shape_str());
  Tensor<T> Y = g.val(a);
  Y.m += g.val(b).m;
  return g.push(std::move(Y), g.any_needs_grad({a, b}), {a, b},
                [a, b](Graph<T>& gr, Var out) {
    if (gr.needs_grad(a)) gr.grad(a).m += gr.grad(out).m;
    if (gr.needs_grad(b)) gr.grad(b).m += gr.grad(out).m;
  });
}

template <class T>
Var mul(Graph<T>& g, Var a, Var b) {
  require(g.val(a).same_shape(g.val(b)), "mul: shape mismatch " +
              g.val(a).shape_str() + " vs " + g.val(b).shape_str());
  Tensor<T> Y = g.val(a);
  Y.m.array() *= g.val(b).m.array();
  return g.push(std::move(Y), g.any_needs_grad({a, b}), {a, b},
                [a, b](Graph<T>& gr, Var out) {
    const auto& dY = gr.grad(out).m.array();
    if (gr.needs_grad(a)) gr.grad(a).m.array() += dY * gr.val(b).m.array();
    if (gr.needs_grad(b)) gr.grad(b).m.array() += dY * gr.val(a).m.array();
  });
}

// elementwise a / b
template <class T>
Var div(Graph<T>& g, Var a, Var b) {
  require(g.val(a).same_shape(g.val(b)), "div: shape mismatch");
  Tensor<T> Y = g.val(a);
  Y.m.array() /= g.val(b).m.array();
  return g.push(std::move(Y), g.any_needs_grad({a, b}), {a, b},
                [a, b](Graph<T>& gr, Var out) {
    const auto& dY = gr.grad(out).m.array();
    if (gr.needs_grad(a)) gr.grad(a).m.array() += dY / gr.val(b).m.array();
    if (gr.needs_grad(b))
      gr.grad(b).m.array() -=
          dY * gr.val(out).m.array() / gr.val(b).m.array();
  });
}

// y = floor + (1 - floor) * sigmoid(x): a logistic squashed into
// (floor, 1), strictly differentiable everywhere.
template <class T>
Var sigmoid_floor(Graph<T>& g, Var x, T floor) {
  const Tensor<T>& X = g.val(x);
  Tensor<T> Y = X.zeros_like();
  const T span = static_cast<T>(1) - floor;
  Y.m.array() =
      floor + span / (static_cast<T>(1) + (-X.m.array()).exp());
  return g.push(std::move(Y), g.needs_grad(x), {x},
                [x, floor, span](Graph<T>& gr, Var out) {
    const auto s = (gr.val(out).m.array() - floor) / span;
    gr.grad(x).m.array() +=
        gr.grad(out).m.array() * span * s * (static_cast<T>(1) - s);
  });
}

// scalar probe: sum(x .* weights); used by the gradient audits
template <class T>
Var dot(Graph<T>& g, Var x, const Tensor<T>& weights) {
  require(g.val(x).same_shape(weights), "dot: shape mismatch");
  Tensor<T> y = Tensor<T>::scalar((g.val(x).m.array() * weights.m.array()).sum());
  Tensor<T> w = weights;
  return g.push(std::move(y), g.needs_grad(x), {x},
                [x, w = std::move(w)](Graph<T>& gr, Var out) {
    gr.grad(x).m.array() += gr.grad(out).m(0, 0) * w.m.array();
  });
}

template <class T>
Var add_scalars(Graph<T>& g, Var a, Var b) {
  require(g.val(a).size() == 1 && g.val(b).size() == 1, "add_scalars: not scalar");
  Tensor<T> y = Tensor<T>::scalar(g.val(a).m(0, 0) + g.val(b).m(0, 0));
  return g.push(std::move(y), g.any_needs_grad({a, b}), {a, b},
                [a, b](Graph<T>& gr, Var out) {
    const T go = gr.grad(out).m(0, 0);
    if (gr.needs_grad(a)) gr.grad(a).m(0, 0) += go;
    if (gr.needs_grad(b)) gr.grad(b).m(0, 0) += go;
  });
}

// convenience: conv -> batch norm -> relu
template <class T>
Var conv_bn_relu(Graph<T>& g, Var x, ConvLayer<T>& conv, BnLayer<T>& bn,
                 int stream = 0) {
  Var y = conv2d(g, x, g.param(conv.weight), g.param(conv.bias));
  y = batch_norm(g, y, bn, stream);
  return relu(g, y);
}

}  // namespace t2
