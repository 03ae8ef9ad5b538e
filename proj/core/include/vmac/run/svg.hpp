#pragma once

#include <string>
#include <vector>

namespace vmac::run {

struct Series {
  std::string name;
  std::string color;                          // css color
  std::vector<std::pair<double, double>> xy;  // sorted by x
};

// Minimal dependency-free SVG line chart, enough to eyeball learning curves.
std::string render_line_chart(const std::string& title, const std::string& x_label,
                              const std::string& y_label, const std::vector<Series>& series,
                              int width = 760, int height = 420);

void write_line_chart(const std::string& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<Series>& series);

}  // namespace vmac::run
