#pragma once

#include <string>
#include <vector>

namespace detnas {

struct SvgCurve {
    std::string label;
    std::string color;  // e.g. "#d62728"
    std::vector<double> xs;
    std::vector<double> ys;
};

// Self-contained polyline chart with axes, ticks and a legend. Output is
// deterministic for identical inputs.
std::string render_line_chart(const std::string& title, const std::string& x_label,
                              const std::string& y_label, const std::vector<SvgCurve>& curves);

}  // namespace detnas
