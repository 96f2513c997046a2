#pragma once

#include <string>
#include <vector>

#include "t2/evalkit.hpp"

namespace t2 {

// Standalone SVG with one precision-recall polyline per class, unit axes,
// gridlines and a legend. labels[i] names curves[i]. Formatting is fixed so
// identical evaluations render byte-identical files.
std::string render_pr_svg(const std::vector<PrCurve>& curves,
                          const std::vector<std::string>& labels);

void write_pr_svg(const std::string& path, const std::vector<PrCurve>& curves,
                  const std::vector<std::string>& labels);

}  // namespace t2
