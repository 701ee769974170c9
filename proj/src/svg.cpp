#include <algorithm>
#include <cmath>
#include <sstream>

#include "pbs/csv.hpp"
#include "pbs/simulation.hpp"

namespace pbs {

std::string study_mse_svg(const StudyResult& result) {
  constexpr double width = 640, height = 400, margin = 50;
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};

  double xmin = HUGE_VAL, xmax = -HUGE_VAL, ymin = HUGE_VAL, ymax = -HUGE_VAL;
  for (const auto& c : result.cells) {
    xmin = std::min(xmin, c.sigma2);
    xmax = std::max(xmax, c.sigma2);
    ymin = std::min(ymin, c.mse);
    ymax = std::max(ymax, c.mse);
  }
  ymin = std::min(ymin, result.ridge_baseline_mse);
  ymax = std::max(ymax, result.ridge_baseline_mse);
  if (!(xmax > xmin)) xmax = xmin + 1.0;
  if (!(ymax > ymin)) ymax = ymin + 1.0;
  auto sx = [&](double x) { return margin + (x - xmin) / (xmax - xmin) * (width - 2 * margin); };
  auto sy = [&](double y) { return height - margin - (y - ymin) / (ymax - ymin) * (height - 2 * margin); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\">estimation MSE vs sigma2</text>\n";
  svg << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\"" << width - margin
      << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
      << height - margin << "\" stroke=\"black\"/>\n";
  const double base = sy(result.ridge_baseline_mse);
  svg << "<line x1=\"" << margin << "\" y1=\"" << base << "\" x2=\"" << width - margin << "\" y2=\""
      << base << "\" stroke=\"gray\" stroke-dasharray=\"4\"/>\n";

  const std::size_t ng = result.gamma_count;
  const std::size_t ns = ng == 0 ? 0 : result.cells.size() / ng;
  for (std::size_t j = 0; j < ng; ++j) {
    svg << "<polyline fill=\"none\" stroke=\"" << colors[j % 6] << "\" points=\"";
    for (std::size_t i = 0; i < ns; ++i) {
      const auto& c = result.at(i, j);
      svg << sx(c.sigma2) << ',' << sy(c.mse) << ' ';
    }
    svg << "\"/>\n";
    svg << "<text x=\"" << width - margin + 5 << "\" y=\"" << margin + 15 * j << "\" fill=\""
        << colors[j % 6] << "\">gamma=" << format_real(result.at(0, j).gamma) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace pbs
