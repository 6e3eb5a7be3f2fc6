#pragma once

#include <string>
#include <vector>

namespace rcsim
{
    struct Series
    {
        std::string label;
        std::vector<double> x;
        std::vector<double> y;
    };

    // Static SVG line chart, one polyline per series.
    std::string svg_line_chart(const std::string &title, const std::string &x_label, const std::string &y_label,
                               const std::vector<Series> &series);

    // Reads a per-window metrics CSV (throughput and latency vs. window index)
    // or a reward CSV "iteration,topology,mean_step_reward" (one curve per
    // topology) and writes SVG files next to out_stem. Returns the paths written.
    std::vector<std::string> plot_csv(const std::string &in_path, const std::string &out_stem);
} // namespace rcsim
