#pragma once
// Static SVG charts for reports.

#include <string>
#include <vector>

namespace tsrisk::plot {

struct Series {
    std::string label;
    std::vector<double> y; // plotted against 1..n
};

std::string line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<Series>& series);

struct Bar {
    std::string label;
    double value = 0.0;
};

std::string bar_chart(const std::string& title, const std::string& y_label, const std::vector<Bar>& bars);

} // namespace tsrisk::plot
