#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace cotstress::svg {

struct Series {
  std::string label;
  std::string color;
  std::vector<std::pair<double, double>> points;
};

/// Minimal line chart writer; enough for rate-versus-parameter plots without
/// an imaging dependency.
inline void write_line_plot(const std::string& path, const std::string& title,
                            const std::string& x_label, const std::vector<Series>& series) {
  constexpr double kW = 640, kH = 420;
  constexpr double kLeft = 64, kRight = 24, kTop = 48, kBottom = 56;

  double x_min = 1e300, x_max = -1e300, y_min = 0.0, y_max = -1e300;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      x_min = std::min(x_min, x);
      x_max = std::max(x_max, x);
      y_max = std::max(y_max, y);
    }
  }
  if (x_min > x_max) return;  // nothing to draw
  if (x_max == x_min) x_max = x_min + 1.0;
  y_max = std::max(y_max * 1.05, 1.0);

  const auto sx = [&](double x) {
    return kLeft + (x - x_min) / (x_max - x_min) * (kW - kLeft - kRight);
  };
  const auto sy = [&](double y) {
    return kH - kBottom - (y - y_min) / (y_max - y_min) * (kH - kTop - kBottom);
  };

  std::ostringstream out;
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kW << "' height='" << kH
      << "' viewBox='0 0 " << kW << " " << kH << "'>\n";
  out << "<rect width='100%' height='100%' fill='white'/>\n";
  out << "<text x='" << kW / 2 << "' y='24' text-anchor='middle' font-size='15'>" << title
      << "</text>\n";

  // Axes and ticks.
  out << "<line x1='" << kLeft << "' y1='" << kH - kBottom << "' x2='" << kW - kRight << "' y2='"
      << kH - kBottom << "' stroke='black'/>\n";
  out << "<line x1='" << kLeft << "' y1='" << kTop << "' x2='" << kLeft << "' y2='"
      << kH - kBottom << "' stroke='black'/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double xv = x_min + (x_max - x_min) * t / 4.0;
    const double yv = y_min + (y_max - y_min) * t / 4.0;
    out << "<text x='" << sx(xv) << "' y='" << kH - kBottom + 18
        << "' text-anchor='middle' font-size='11'>" << xv << "</text>\n";
    out << "<text x='" << kLeft - 8 << "' y='" << sy(yv) + 4
        << "' text-anchor='end' font-size='11'>" << yv << "</text>\n";
    out << "<line x1='" << kLeft << "' y1='" << sy(yv) << "' x2='" << kW - kRight << "' y2='"
        << sy(yv) << "' stroke='#dddddd'/>\n";
  }
  out << "<text x='" << (kLeft + kW - kRight) / 2 << "' y='" << kH - 16
      << "' text-anchor='middle' font-size='12'>" << x_label << "</text>\n";

  double legend_y = kTop;
  for (const auto& s : series) {
    std::ostringstream pts;
    for (const auto& [x, y] : s.points) pts << sx(x) << "," << sy(y) << " ";
    out << "<polyline fill='none' stroke='" << s.color << "' stroke-width='2' points='"
        << pts.str() << "'/>\n";
    for (const auto& [x, y] : s.points) {
      out << "<circle cx='" << sx(x) << "' cy='" << sy(y) << "' r='3' fill='" << s.color
          << "'/>\n";
    }
    out << "<rect x='" << kW - kRight - 120 << "' y='" << legend_y << "' width='12' height='12' fill='"
        << s.color << "'/>\n";
    out << "<text x='" << kW - kRight - 102 << "' y='" << legend_y + 10 << "' font-size='12'>"
        << s.label << "</text>\n";
    legend_y += 18;
  }
  out << "</svg>\n";

  std::ofstream file(path);
  file << out.str();
}

}  // namespace cotstress::svg
