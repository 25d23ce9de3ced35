#pragma once

#include <string>
#include <vector>

#include "itcl/assembly.hpp"

namespace itcl {

struct PlotSeries {
    std::string name;
    std::vector<double> values; // x = 1..n
};

// Self-contained SVG figures (no plotting dependency).
std::string svg_line_chart(const std::string& title, const std::string& x_label,
                           const std::string& y_label, const std::vector<PlotSeries>& series);
std::string svg_bar_chart(const std::string& title, const std::string& x_label,
                          const std::string& y_label, const std::vector<PlotSeries>& series);

// Renders each learned frame/perturbation as a PNG (min/max scaled); returns
// the files written. One image per transform (task) in the bank.
std::vector<std::string> export_transform_images(const Assembly& a, const std::string& dir,
                                                 const std::string& prefix);

// Figure emission for completed run directories (matrix.csv + report.json +
// checkpoints). Writes avg_accuracy.svg, task_accuracy.svg and transform PNGs.
std::vector<std::string> plot_runs(const std::vector<std::string>& run_dirs,
                                   const std::string& out_dir);

} // namespace itcl
