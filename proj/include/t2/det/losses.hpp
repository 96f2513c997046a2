#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "t2/det/anchors.hpp"

namespace t2 {

inline constexpr double kProbClamp = 1e-12;

// numerically shifted softmax, in place allowed (p may alias z)
inline void softmax_row(const double* z, int n, double* p) {
  double zmax = z[0];
  for (int i = 1; i < n; ++i) zmax = std::max(zmax, z[i]);
  double sum = 0;
  for (int i = 0; i < n; ++i) {
    p[i] = std::exp(z[i] - zmax);
    sum += p[i];
  }
  for (int i = 0; i < n; ++i) p[i] /= sum;
}

// -alpha_t * (1 - p_t)^gamma * ln(p_t)
inline double focal_from_prob(double p_t, double gamma, double alpha_t) {
  const double p = std::max(p_t, kProbClamp);
  return -alpha_t * std::pow(1.0 - p, gamma) * std::log(p);
}

// d(focal)/d(logit_j) = alpha_t (p_j - [j==t]) ((1-p_t)^g - g p_t (1-p_t)^(g-1) ln p_t)
// The shared trailing factor depends only on p_t; compute it once per anchor.
inline double focal_logit_factor(double p_t, double gamma, double alpha_t) {
  const double p = std::max(p_t, kProbClamp);
  const double q = 1.0 - p;
  double f = std::pow(q, gamma);
  if (gamma > 0.0) f -= gamma * p * std::pow(q, gamma - 1.0) * std::log(p);
  return alpha_t * f;
}

inline double smooth_l1(double x) {
  const double a = std::abs(x);
  return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

inline double smooth_l1_grad(double x) {
  if (x > 1.0) return 1.0;
  if (x < -1.0) return -1.0;
  return x;
}

struct MiningConfig {
  double ratio = 3.0;        // negatives per positive; non-finite keeps all
  int floor_negatives = 16;  // selection size when an image has no positives
};

// Keeps every positive plus the hardest negatives at the configured ratio.
// Ties in confidence loss resolve to the lower anchor index.
inline std::vector<uint8_t> mine_negatives(const std::vector<double>& conf_loss,
                                           const std::vector<int>& truth_of,
                                           const MiningConfig& cfg = {}) {
  const size_t A = conf_loss.size();
  std::vector<uint8_t> selected(A, 0);
  std::vector<int> negatives;
  int positives = 0;
  for (size_t a = 0; a < A; ++a) {
    if (truth_of[a] >= 0) {
      selected[a] = 1;
      ++positives;
    } else {
      negatives.push_back(static_cast<int>(a));
    }
  }
  const double cap = static_cast<double>(negatives.size());
  double want;
  if (!std::isfinite(cfg.ratio)) {
    want = cap;  // ratio = inf disables mining, focal sees every negative
  } else if (positives > 0) {
    want = std::ceil(cfg.ratio * positives);
  } else {
    want = cfg.floor_negatives;
  }
  const size_t keep = static_cast<size_t>(std::min(want, cap));
  std::stable_sort(negatives.begin(), negatives.end(), [&](int a, int b) {
    return conf_loss[a] > conf_loss[b];
  });
  for (size_t i = 0; i < keep; ++i) selected[negatives[i]] = 1;
  return selected;
}

}  // namespace t2
