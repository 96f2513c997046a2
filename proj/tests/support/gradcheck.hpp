#pragma once

#include <functional>
#include <vector>

#include "doctest.h"
#include "t2/core/rng.hpp"
#include "t2/nn/params.hpp"

namespace t2::testing {

// Central-difference audit of analytic parameter gradients.
//
// `loss` must build a fresh graph from the current parameter values, run
// backward(), and return the scalar loss; backward() flushes d(loss)/d(p)
// into p->grad. Every coordinate is probed when a parameter is small,
// otherwise a seeded random subset.
inline void check_grads(const std::function<double()>& loss,
                        const std::vector<Param<double>*>& params,
                        double h = 1e-5, double tol = 1e-6,
                        int max_coords = 48, uint64_t seed = 99) {
  for (auto* p : params) p->zero_grad();
  loss();
  std::vector<Tensor<double>> analytic;
  analytic.reserve(params.size());
  for (auto* p : params) analytic.push_back(p->grad);

  Rng rng(seed);
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Param<double>& p = *params[pi];
    const Eigen::Index n = p.value.size();
    std::vector<Eigen::Index> coords;
    if (n <= max_coords) {
      for (Eigen::Index i = 0; i < n; ++i) coords.push_back(i);
    } else {
      for (int i = 0; i < max_coords; ++i)
        coords.push_back(rng.uniform_int(static_cast<int>(n)));
    }
    for (Eigen::Index ci : coords) {
      double* x = p.value.m.data() + ci;
      const double orig = *x;
      *x = orig + h;
      const double fp = loss();
      *x = orig - h;
      const double fm = loss();
      *x = orig;
      const double fd = (fp - fm) / (2.0 * h);
      const double an = analytic[pi].m.data()[ci];
      const double err = std::abs(an - fd) / std::max(1.0, std::abs(an) + std::abs(fd));
      INFO("param ", p.name, " coord ", ci, " analytic ", an, " fd ", fd);
      CHECK(err <= tol);
    }
  }
}

}  // namespace t2::testing
