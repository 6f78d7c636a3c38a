#include "mipa/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mipa {

void write_grouped_bar_svg(const std::string& path, const std::string& title,
                           const std::vector<std::string>& categories,
                           const std::vector<BarSeries>& series,
                           const std::string& y_label) {
    static const char* kColors[] = {"#4878cf", "#ee854a", "#6acc65", "#d65f5f", "#956cb4"};
    const int width = std::max(520, 120 + static_cast<int>(categories.size()) * 110);
    const int height = 360;
    const double left = 70, right = 30, top = 50, bottom = 70;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;

    double y_max = 0.0;
    for (const BarSeries& s : series)
        for (std::size_t i = 0; i < s.values.size(); ++i) {
            const double err = i < s.errors.size() ? s.errors[i] : 0.0;
            y_max = std::max(y_max, s.values[i] + err);
        }
    if (y_max <= 0.0) y_max = 1.0;
    y_max *= 1.08;

    std::ostringstream svg;
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height << "'>\n";
    svg << "<rect width='100%' height='100%' fill='white'/>\n";
    svg << "<text x='" << width / 2 << "' y='24' text-anchor='middle' font-size='15' "
           "font-family='sans-serif'>" << title << "</text>\n";
    svg << "<text x='16' y='" << top + plot_h / 2 << "' text-anchor='middle' font-size='12' "
           "font-family='sans-serif' transform='rotate(-90 16 " << top + plot_h / 2 << ")'>"
        << y_label << "</text>\n";

    // Axes and horizontal gridlines.
    svg << "<line x1='" << left << "' y1='" << top << "' x2='" << left << "' y2='" << top + plot_h
        << "' stroke='black'/>\n";
    svg << "<line x1='" << left << "' y1='" << top + plot_h << "' x2='" << left + plot_w << "' y2='"
        << top + plot_h << "' stroke='black'/>\n";
    for (int tick = 0; tick <= 5; ++tick) {
        const double frac = tick / 5.0;
        const double y = top + plot_h * (1.0 - frac);
        svg << "<line x1='" << left - 4 << "' y1='" << y << "' x2='" << left + plot_w << "' y2='" << y
            << "' stroke='#dddddd'/>\n";
        svg << "<text x='" << left - 8 << "' y='" << y + 4 << "' text-anchor='end' font-size='11' "
               "font-family='sans-serif'>" << (y_max * frac) << "</text>\n";
    }

    const double group_w = plot_w / std::max<std::size_t>(1, categories.size());
    const double bar_w = group_w * 0.8 / std::max<std::size_t>(1, series.size());
    for (std::size_t g = 0; g < categories.size(); ++g) {
        const double group_x = left + group_w * g + group_w * 0.1;
        for (std::size_t s = 0; s < series.size(); ++s) {
            if (g >= series[s].values.size()) continue;
            const double value = series[s].values[g];
            const double bar_h = plot_h * std::clamp(value / y_max, 0.0, 1.0);
            const double x = group_x + bar_w * s;
            const double y = top + plot_h - bar_h;
            svg << "<rect x='" << x << "' y='" << y << "' width='" << bar_w * 0.92 << "' height='"
                << bar_h << "' fill='" << kColors[s % 5] << "'/>\n";
            if (g < series[s].errors.size() && series[s].errors[g] > 0.0) {
                const double err_h = plot_h * series[s].errors[g] / y_max;
                const double cx = x + bar_w * 0.46;
                svg << "<line x1='" << cx << "' y1='" << y - err_h << "' x2='" << cx << "' y2='"
                    << std::min(top + plot_h, y + err_h) << "' stroke='black'/>\n";
            }
        }
        svg << "<text x='" << left + group_w * g + group_w / 2 << "' y='" << top + plot_h + 18
            << "' text-anchor='middle' font-size='11' font-family='sans-serif'>" << categories[g]
            << "</text>\n";
    }

    // Legend.
    double legend_x = left;
    const double legend_y = height - 24;
    for (std::size_t s = 0; s < series.size(); ++s) {
        svg << "<rect x='" << legend_x << "' y='" << legend_y - 10 << "' width='12' height='12' fill='"
            << kColors[s % 5] << "'/>\n";
        svg << "<text x='" << legend_x + 16 << "' y='" << legend_y << "' font-size='12' "
               "font-family='sans-serif'>" << series[s].name << "</text>\n";
        legend_x += 20 + 9.0 * series[s].name.size();
    }
    svg << "</svg>\n";

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write plot " + path);
    out << svg.str();
}

void write_line_svg(const std::string& path, const std::string& title,
                    const std::vector<LineSeries>& series, const std::string& x_label,
                    const std::string& y_label) {
    static const char* kColors[] = {"#4878cf", "#ee854a", "#6acc65", "#d65f5f", "#956cb4"};
    const int width = 640, height = 360;
    const double left = 70, right = 30, top = 50, bottom = 60;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;

    double x_min = 0.0, x_max = 1.0, y_min = 0.0, y_max = 1.0;
    bool first = true;
    for (const LineSeries& s : series)
        for (std::size_t i = 0; i < s.xs.size(); ++i) {
            if (first) {
                x_min = x_max = s.xs[i];
                y_min = y_max = s.ys[i];
                first = false;
            }
            x_min = std::min(x_min, s.xs[i]);
            x_max = std::max(x_max, s.xs[i]);
            y_min = std::min(y_min, s.ys[i]);
            y_max = std::max(y_max, s.ys[i]);
        }
    if (x_max == x_min) x_max = x_min + 1.0;
    if (y_max == y_min) y_max = y_min + 1.0;
    y_min = std::min(0.0, y_min);
    y_max *= 1.05;

    auto px = [&](double x) { return left + plot_w * (x - x_min) / (x_max - x_min); };
    auto py = [&](double y) { return top + plot_h * (1.0 - (y - y_min) / (y_max - y_min)); };

    std::ostringstream svg;
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height << "'>\n";
    svg << "<rect width='100%' height='100%' fill='white'/>\n";
    svg << "<text x='" << width / 2 << "' y='24' text-anchor='middle' font-size='15' "
           "font-family='sans-serif'>" << title << "</text>\n";
    svg << "<line x1='" << left << "' y1='" << top << "' x2='" << left << "' y2='" << top + plot_h
        << "' stroke='black'/>\n";
    svg << "<line x1='" << left << "' y1='" << top + plot_h << "' x2='" << left + plot_w << "' y2='"
        << top + plot_h << "' stroke='black'/>\n";
    for (int tick = 0; tick <= 5; ++tick) {
        const double frac = tick / 5.0;
        const double y = top + plot_h * (1.0 - frac);
        svg << "<line x1='" << left - 4 << "' y1='" << y << "' x2='" << left + plot_w << "' y2='" << y
            << "' stroke='#dddddd'/>\n";
        svg << "<text x='" << left - 8 << "' y='" << y + 4 << "' text-anchor='end' font-size='11' "
               "font-family='sans-serif'>" << (y_min + (y_max - y_min) * frac) << "</text>\n";
        const double x_val = x_min + (x_max - x_min) * frac;
        svg << "<text x='" << px(x_val) << "' y='" << top + plot_h + 16
            << "' text-anchor='middle' font-size='11' font-family='sans-serif'>" << x_val
            << "</text>\n";
    }
    svg << "<text x='" << left + plot_w / 2 << "' y='" << height - 28
        << "' text-anchor='middle' font-size='12' font-family='sans-serif'>" << x_label << "</text>\n";
    svg << "<text x='16' y='" << top + plot_h / 2 << "' text-anchor='middle' font-size='12' "
           "font-family='sans-serif' transform='rotate(-90 16 " << top + plot_h / 2 << ")'>"
        << y_label << "</text>\n";

    for (std::size_t s = 0; s < series.size(); ++s) {
        if (series[s].xs.empty()) continue;
        svg << "<polyline fill='none' stroke='" << kColors[s % 5] << "' stroke-width='1.5' points='";
        for (std::size_t i = 0; i < series[s].xs.size(); ++i)
            svg << px(series[s].xs[i]) << ',' << py(series[s].ys[i]) << ' ';
        svg << "'/>\n";
    }
    double legend_x = left + 8;
    for (std::size_t s = 0; s < series.size(); ++s) {
        svg << "<line x1='" << legend_x << "' y1='" << height - 10 << "' x2='" << legend_x + 16
            << "' y2='" << height - 10 << "' stroke='" << kColors[s % 5] << "' stroke-width='2'/>\n";
        svg << "<text x='" << legend_x + 20 << "' y='" << height - 6 << "' font-size='12' "
               "font-family='sans-serif'>" << series[s].name << "</text>\n";
        legend_x += 28 + 8.0 * series[s].name.size();
    }
    svg << "</svg>\n";

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write plot " + path);
    out << svg.str();
}

} // namespace mipa
