#pragma once

#include <string>
#include <vector>

namespace mipa {

// One bar group per category, one bar per series entry, with optional
// symmetric error whiskers.
struct BarSeries {
    std::string name;
    std::vector<double> values;
    std::vector<double> errors; // may be empty
};

void write_grouped_bar_svg(const std::string& path, const std::string& title,
                           const std::vector<std::string>& categories,
                           const std::vector<BarSeries>& series,
                           const std::string& y_label);

struct LineSeries {
    std::string name;
    std::vector<double> xs;
    std::vector<double> ys;
};

void write_line_svg(const std::string& path, const std::string& title,
                    const std::vector<LineSeries>& series, const std::string& x_label,
                    const std::string& y_label);

} // namespace mipa
