#pragma once

#include <array>
#include <memory>
#include <utility>
#include <vector>

#include "t2/core/autodiff.hpp"
#include "t2/det/anchors.hpp"
#include "t2/det/losses.hpp"

namespace t2 {

struct DetectionLossConfig {
  int num_classes = 4;  // foreground classes; background index = num_classes
  double alpha = 1.0;   // localization weight inside (conf + alpha*loc)/N
  double gamma = 2.0;
  double alpha_f = 0.25;  // focal weight for positives; negatives get 1-alpha_f
  double iou_threshold = 0.3;
  MiningConfig mining;
  BoxCoding coding;
};

// Normalized per-batch contributions; total = conf + alpha * loc.
struct LossReport {
  double total = 0, conf = 0, loc = 0;
  int positives = 0;
};

namespace detail {

struct ImagePlan {
  MatchResult match;
  std::vector<uint8_t> selected;
  // positive anchors with their encoded regression targets
  std::vector<std::pair<Eigen::Index, std::array<double, 4>>> targets;
};

}  // namespace detail

// Per image: match anchors to truths, hard-mine negatives, focal loss over
// the selection plus smooth L1 over positives, normalized by the positive
// count. The batch result is the mean of per-image losses. All internal
// arithmetic runs in double regardless of the graph scalar.
template <class T>
Var detection_loss(Graph<T>& g, const std::vector<Var>& cls,
                   const std::vector<Var>& reg, const AnchorSet& anchors,
                   const std::vector<std::vector<Annotation>>& truths,
                   const DetectionLossConfig& cfg, LossReport* report = nullptr) {
  require(cls.size() == 6 && reg.size() == 6, "detection_loss: need 6 levels");
  const int B = g.val(cls[0]).n;
  require(static_cast<int>(truths.size()) == B,
          "detection_loss: batch size mismatch");
  const int C1 = cfg.num_classes + 1;
  const int R = anchors.num_ratios;
  for (int li = 0; li < 6; ++li) {
    const auto& c = g.val(cls[li]);
    const auto& r = g.val(reg[li]);
    require(c.n == B && c.c == R * C1 && c.h == anchors.grid_h[li] &&
                c.w == anchors.grid_w[li],
            "detection_loss: class head shape off at level index " +
                std::to_string(li) + ": " + c.shape_str());
    require(r.n == B && r.c == R * 4 && r.h == c.h && r.w == c.w,
            "detection_loss: regression head shape off at level index " +
                std::to_string(li));
  }
  for (const auto& img : truths)
    for (const auto& ann : img) {
      require(box_valid(ann.box), "detection_loss: invalid truth box");
      require(ann.class_id >= 0 && ann.class_id < cfg.num_classes,
              "detection_loss: class_id " + std::to_string(ann.class_id) +
                  " outside [0," + std::to_string(cfg.num_classes) + ")");
    }

  const Eigen::Index A = anchors.size();
  auto plans = std::make_shared<std::vector<detail::ImagePlan>>(B);
  std::vector<double> z(C1), p(C1);
  double total = 0, conf_total = 0, loc_total = 0;
  int positives_total = 0;

  for (int n = 0; n < B; ++n) {
    detail::ImagePlan& plan = (*plans)[n];
    plan.match = match(anchors, truths[n], cfg.iou_threshold);
    std::vector<double> conf_loss(A);
    for (int li = 0; li < 6; ++li) {
      const auto& cv = g.val(cls[li]);
      for (int y = 0; y < anchors.grid_h[li]; ++y)
        for (int x = 0; x < anchors.grid_w[li]; ++x)
          for (int r = 0; r < R; ++r) {
            const Eigen::Index a = anchors.index(li, y, x, r);
            for (int c = 0; c < C1; ++c)
              z[c] = static_cast<double>(cv.at(n, r * C1 + c, y, x));
            softmax_row(z.data(), C1, p.data());
            const int t = plan.match.truth_of[a];
            const int tc = t >= 0 ? truths[n][t].class_id : cfg.num_classes;
            const double at = t >= 0 ? cfg.alpha_f : 1.0 - cfg.alpha_f;
            conf_loss[a] = focal_from_prob(p[tc], cfg.gamma, at);
          }
    }
    plan.selected = mine_negatives(conf_loss, plan.match.truth_of, cfg.mining);

    double lc = 0;
    for (Eigen::Index a = 0; a < A; ++a)
      if (plan.selected[a]) lc += conf_loss[a];

    double ll = 0;
    for (int li = 0; li < 6; ++li) {
      const auto& rv = g.val(reg[li]);
      for (int y = 0; y < anchors.grid_h[li]; ++y)
        for (int x = 0; x < anchors.grid_w[li]; ++x)
          for (int r = 0; r < R; ++r) {
            const Eigen::Index a = anchors.index(li, y, x, r);
            const int t = plan.match.truth_of[a];
            if (t < 0) continue;
            const auto tgt =
                encode(truths[n][t].box, anchors.boxes[a], cfg.coding);
            for (int j = 0; j < 4; ++j) {
              const double pred =
                  static_cast<double>(rv.at(n, r * 4 + j, y, x));
              ll += smooth_l1(pred - tgt[j]);
            }
            plan.targets.emplace_back(a, tgt);
          }
    }

    const int npos = plan.match.num_positives;
    const double norm = 1.0 / std::max(npos, 1);
    total += (lc + cfg.alpha * ll) * norm;
    conf_total += lc * norm;
    loc_total += ll * norm;
    positives_total += npos;
  }
  total /= B;
  conf_total /= B;
  loc_total /= B;
  if (report) {
    report->total = total;
    report->conf = conf_total;
    report->loc = loc_total;
    report->positives = positives_total;
  }

  std::vector<Var> parents;
  parents.insert(parents.end(), cls.begin(), cls.end());
  parents.insert(parents.end(), reg.begin(), reg.end());
  bool ng = false;
  for (Var v : parents) ng = ng || g.needs_grad(v);

  auto anchors_copy = std::make_shared<AnchorSet>(anchors);
  auto truths_copy = std::make_shared<std::vector<std::vector<Annotation>>>(truths);
  auto cls_copy = cls;
  auto reg_copy = reg;
  return g.push(
      Tensor<T>::scalar(static_cast<T>(total)), ng, parents,
      [cls_copy, reg_copy, plans, anchors_copy, truths_copy, cfg,
       B](Graph<T>& gr, Var out) {
        const double u = static_cast<double>(gr.grad(out).m(0, 0));
        const AnchorSet& anc = *anchors_copy;
        const int C1 = cfg.num_classes + 1;
        const int R = anc.num_ratios;
        std::vector<double> z(C1), p(C1);
        for (int n = 0; n < B; ++n) {
          const detail::ImagePlan& plan = (*plans)[n];
          const double scale =
              u / (static_cast<double>(B) * std::max(plan.match.num_positives, 1));
          for (int li = 0; li < 6; ++li) {
            if (!gr.needs_grad(cls_copy[li])) continue;
            const auto& cv = gr.val(cls_copy[li]);
            auto& cg = gr.grad(cls_copy[li]);
            for (int y = 0; y < anc.grid_h[li]; ++y)
              for (int x = 0; x < anc.grid_w[li]; ++x)
                for (int r = 0; r < R; ++r) {
                  const Eigen::Index a = anc.index(li, y, x, r);
                  if (!plan.selected[a]) continue;
                  for (int c = 0; c < C1; ++c)
                    z[c] = static_cast<double>(cv.at(n, r * C1 + c, y, x));
                  softmax_row(z.data(), C1, p.data());
                  const int t = plan.match.truth_of[a];
                  const int tc =
                      t >= 0 ? (*truths_copy)[n][t].class_id : cfg.num_classes;
                  const double at = t >= 0 ? cfg.alpha_f : 1.0 - cfg.alpha_f;
                  const double f = focal_logit_factor(p[tc], cfg.gamma, at);
                  for (int c = 0; c < C1; ++c) {
                    const double delta = c == tc ? 1.0 : 0.0;
                    cg.at(n, r * C1 + c, y, x) +=
                        static_cast<T>(f * (p[c] - delta) * scale);
                  }
                }
          }
          for (const auto& [a, tgt] : plan.targets) {
            // invert the flat anchor index back to (level, y, x, ratio)
            int li = 5;
            while (anc.level_begin[li] > a) --li;
            if (!gr.needs_grad(reg_copy[li])) continue;
            const Eigen::Index rel = a - anc.level_begin[li];
            const int r = static_cast<int>(rel % R);
            const Eigen::Index cell = rel / R;
            const int x = static_cast<int>(cell % anc.grid_w[li]);
            const int y = static_cast<int>(cell / anc.grid_w[li]);
            const auto& rv = gr.val(reg_copy[li]);
            auto& rg = gr.grad(reg_copy[li]);
            for (int j = 0; j < 4; ++j) {
              const double pred = static_cast<double>(rv.at(n, r * 4 + j, y, x));
              rg.at(n, r * 4 + j, y, x) += static_cast<T>(
                  smooth_l1_grad(pred - tgt[j]) * cfg.alpha * scale);
            }
          }
        }
      });
}

}  // namespace t2
