#include "tsrisk/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace tsrisk::plot {

namespace {

constexpr double kWidth = 640;
constexpr double kHeight = 400;
constexpr double kLeft = 70;
constexpr double kRight = 20;
constexpr double kTop = 40;
constexpr double kBottom = 50;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string escape(const std::string& s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

void frame(std::ostringstream& svg, const std::string& title, const std::string& x_label, const std::string& y_label,
           double lo, double hi)
{
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
        << "</text>\n"
        << "<line x1=\"" << kLeft << "\" y1=\"" << kHeight - kBottom << "\" x2=\"" << kWidth - kRight << "\" y2=\""
        << kHeight - kBottom << "\" stroke=\"black\"/>\n"
        << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kHeight - kBottom
        << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">" << escape(x_label)
        << "</text>\n"
        << "<text x=\"16\" y=\"" << kHeight / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
        << kHeight / 2 << ")\">" << escape(y_label) << "</text>\n"
        << "<text x=\"" << kLeft - 6 << "\" y=\"" << kTop + 4 << "\" text-anchor=\"end\">" << num(hi) << "</text>\n"
        << "<text x=\"" << kLeft - 6 << "\" y=\"" << kHeight - kBottom << "\" text-anchor=\"end\">" << num(lo)
        << "</text>\n";
}

} // namespace

std::string line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<Series>& series)
{
    double lo = INFINITY;
    double hi = -INFINITY;
    std::size_t longest = 1;
    for (const Series& s : series) {
        for (double v : s.y) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        longest = std::max(longest, s.y.size());
    }
    if (!std::isfinite(lo)) {
        lo = 0.0;
        hi = 1.0;
    }
    if (hi == lo) {
        hi = lo + 1.0;
    }
    std::ostringstream svg;
    frame(svg, title, x_label, y_label, lo, hi);
    const double plot_w = kWidth - kLeft - kRight;
    const double plot_h = kHeight - kTop - kBottom;
    for (std::size_t k = 0; k < series.size(); ++k) {
        const Series& s = series[k];
        const char* color = kColors[k % std::size(kColors)];
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.y.size(); ++i) {
            const double x = kLeft + (longest == 1 ? 0.0 : plot_w * static_cast<double>(i) / (longest - 1.0));
            const double y = kTop + plot_h * (1.0 - (s.y[i] - lo) / (hi - lo));
            svg << num(x) << ',' << num(y) << ' ';
        }
        svg << "\"/>\n";
        svg << "<text x=\"" << kWidth - kRight - 4 << "\" y=\"" << kTop + 14 * (k + 1) << "\" text-anchor=\"end\" fill=\""
            << color << "\">" << escape(s.label) << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

std::string bar_chart(const std::string& title, const std::string& y_label, const std::vector<Bar>& bars)
{
    double hi = 0.0;
    for (const Bar& b : bars) {
        hi = std::max(hi, b.value);
    }
    if (hi == 0.0) {
        hi = 1.0;
    }
    std::ostringstream svg;
    frame(svg, title, "cluster", y_label, 0.0, hi);
    const double plot_w = kWidth - kLeft - kRight;
    const double plot_h = kHeight - kTop - kBottom;
    const double slot = bars.empty() ? plot_w : plot_w / static_cast<double>(bars.size());
    for (std::size_t i = 0; i < bars.size(); ++i) {
        const double h = plot_h * bars[i].value / hi;
        const double x = kLeft + slot * static_cast<double>(i) + slot * 0.15;
        svg << "<rect x=\"" << num(x) << "\" y=\"" << num(kTop + plot_h - h) << "\" width=\"" << num(slot * 0.7)
            << "\" height=\"" << num(h) << "\" fill=\"" << kColors[0] << "\"/>\n"
            << "<text x=\"" << num(x + slot * 0.35) << "\" y=\"" << kHeight - kBottom + 16
            << "\" text-anchor=\"middle\">" << escape(bars[i].label) << "</text>\n"
            << "<text x=\"" << num(x + slot * 0.35) << "\" y=\"" << num(kTop + plot_h - h - 4)
            << "\" text-anchor=\"middle\">" << num(bars[i].value) << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

} // namespace tsrisk::plot
