#pragma once

#include <Eigen/Dense>

#include <string>

#include "t2/core/errors.hpp"

namespace t2 {

// Dense value container used throughout the network code, templated on the
// scalar so the same graph runs in float for training and double for the
// finite-difference audits.
//
// The storage is a single column-major Eigen matrix `m`; the (n, c, h, w)
// fields say how to read it:
//   - feature batches:  m is (n*h*w) x c, row index = (n*h + y)*w + x.
//     Each column holds one channel, image-major, so a per-image channel
//     plane is one contiguous segment. A convolution is then exactly
//     im2col(x) * w with no post-GEMM shuffle.
//   - conv kernels:     dims are (cout=n, cin=c, kh=h, kw=w) and m is the
//     GEMM form (cin*kh*kw) x cout with row k = (cin*kh + ky)*kw + kx.
//   - vectors (biases, per-channel stats): m is len x 1 with c = len.
template <class T>
struct Tensor {
  using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

  int n = 0, c = 0, h = 0, w = 0;
  Matrix m;

  Tensor() = default;

  static Tensor grid(int n, int c, int h, int w) {
    Tensor t;
    t.n = n;
    t.c = c;
    t.h = h;
    t.w = w;
    t.m.setZero(static_cast<Eigen::Index>(n) * h * w, c);
    return t;
  }

  static Tensor kernel(int cout, int cin, int kh, int kw) {
    Tensor t;
    t.n = cout;
    t.c = cin;
    t.h = kh;
    t.w = kw;
    t.m.setZero(static_cast<Eigen::Index>(cin) * kh * kw, cout);
    return t;
  }

  static Tensor vec(int len) {
    Tensor t;
    t.n = 1;
    t.c = len;
    t.h = 1;
    t.w = 1;
    t.m.setZero(len, 1);
    return t;
  }

  static Tensor scalar(T v) {
    Tensor t = vec(1);
    t.m(0, 0) = v;
    return t;
  }

  bool is_grid() const { return m.cols() == c && m.rows() == Eigen::Index(n) * h * w; }

  Eigen::Index size() const { return m.size(); }

  int row(int in, int y, int x) const { return (in * h + y) * w + x; }

  T& at(int in, int ic, int y, int x) { return m(row(in, y, x), ic); }
  T at(int in, int ic, int y, int x) const { return m(row(in, y, x), ic); }

  // contiguous channel plane of one image (grid layout only)
  auto plane(int in, int ic) { return m.col(ic).segment(Eigen::Index(in) * h * w, Eigen::Index(h) * w); }
  auto plane(int in, int ic) const { return m.col(ic).segment(Eigen::Index(in) * h * w, Eigen::Index(h) * w); }

  bool same_shape(const Tensor& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }

  Tensor zeros_like() const {
    Tensor t;
    t.n = n;
    t.c = c;
    t.h = h;
    t.w = w;
    t.m.setZero(m.rows(), m.cols());
    return t;
  }

  bool all_finite() const { return m.allFinite(); }

  std::string shape_str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
           std::to_string(h) + "," + std::to_string(w) + ")";
  }

  template <class U>
  Tensor<U> cast() const {
    Tensor<U> t;
    t.n = n;
    t.c = c;
    t.h = h;
    t.w = w;
    t.m = m.template cast<U>();
    return t;
  }
};

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw ValidationError(msg);
}

}  // namespace t2
