#include "t2/harness/pr_plot.hpp"

#include <cstdio>
#include <fstream>

#include "t2/core/errors.hpp"
#include "t2/core/tensor.hpp"

namespace t2 {

namespace {

constexpr int kWidth = 720, kHeight = 480;
constexpr double kPlotX = 60, kPlotY = 20, kPlotW = 480, kPlotH = 410;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c",
                          "#9467bd", "#ff7f0e", "#8c564b"};
constexpr int kPaletteSize = 6;

std::string num(double v, const char* spec = "%.2f") {
  char buf[40];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

double px(double recall) { return kPlotX + recall * kPlotW; }
double py(double precision) { return kPlotY + (1.0 - precision) * kPlotH; }

}  // namespace

std::string render_pr_svg(const std::vector<PrCurve>& curves,
                          const std::vector<std::string>& labels) {
  require(curves.size() == labels.size(),
          "render_pr_svg: one label per curve");
  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
       std::to_string(kWidth) + "\" height=\"" + std::to_string(kHeight) +
       "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  for (int i = 0; i <= 5; ++i) {
    const double t = i / 5.0;
    s += "<line x1=\"" + num(px(t)) + "\" y1=\"" + num(kPlotY) + "\" x2=\"" +
         num(px(t)) + "\" y2=\"" + num(kPlotY + kPlotH) +
         "\" stroke=\"#dddddd\"/>\n";
    s += "<line x1=\"" + num(kPlotX) + "\" y1=\"" + num(py(t)) + "\" x2=\"" +
         num(kPlotX + kPlotW) + "\" y2=\"" + num(py(t)) +
         "\" stroke=\"#dddddd\"/>\n";
    s += "<text x=\"" + num(px(t)) + "\" y=\"" + num(kPlotY + kPlotH + 18) +
         "\" text-anchor=\"middle\">" + num(t, "%.1f") + "</text>\n";
    s += "<text x=\"" + num(kPlotX - 8) + "\" y=\"" + num(py(t) + 4) +
         "\" text-anchor=\"end\">" + num(t, "%.1f") + "</text>\n";
  }
  s += "<rect x=\"" + num(kPlotX) + "\" y=\"" + num(kPlotY) + "\" width=\"" +
       num(kPlotW) + "\" height=\"" + num(kPlotH) +
       "\" fill=\"none\" stroke=\"black\"/>\n";
  s += "<text x=\"" + num(kPlotX + kPlotW / 2) + "\" y=\"" +
       num(kPlotY + kPlotH + 38) + "\" text-anchor=\"middle\">recall</text>\n";
  s += "<text x=\"16\" y=\"" + num(kPlotY + kPlotH / 2) +
       "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
       num(kPlotY + kPlotH / 2) + ")\">precision</text>\n";

  const double legend_x = kPlotX + kPlotW + 24;
  for (size_t i = 0; i < curves.size(); ++i) {
    const char* color = kPalette[i % kPaletteSize];
    if (!curves[i].points.empty()) {
      std::string pts;
      for (const auto& p : curves[i].points) {
        if (!pts.empty()) pts += " ";
        pts += num(px(p.recall)) + "," + num(py(p.precision));
      }
      s += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color +
           "\" stroke-width=\"1.5\"/>\n";
    }
    const double ly = kPlotY + 12 + 20.0 * static_cast<double>(i);
    s += "<line x1=\"" + num(legend_x) + "\" y1=\"" + num(ly - 4) +
         "\" x2=\"" + num(legend_x + 24) + "\" y2=\"" + num(ly - 4) +
         "\" stroke=\"" + color + "\" stroke-width=\"1.5\"/>\n";
    s += "<text x=\"" + num(legend_x + 30) + "\" y=\"" + num(ly) + "\">" +
         labels[i] + (curves[i].points.empty() ? " (no detections)" : "") +
         "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

void write_pr_svg(const std::string& path, const std::vector<PrCurve>& curves,
                  const std::vector<std::string>& labels) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write " + path);
  f << render_pr_svg(curves, labels);
}

}  // namespace t2
