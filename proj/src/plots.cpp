#include "itcl/plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "itcl/io/checkpoint.hpp"
#include "itcl/io/png.hpp"
#include "itcl/metrics.hpp"

namespace itcl {

namespace fs = std::filesystem;

namespace {

constexpr int kW = 640, kH = 420;
constexpr int kMarginL = 70, kMarginR = 160, kMarginT = 50, kMarginB = 50;

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

struct Scale {
    double lo, hi;
    double px(double v, int pixels, int offset, bool flip) const {
        const double t = (v - lo) / (hi - lo);
        return flip ? offset + pixels * (1.0 - t) : offset + pixels * t;
    }
};

void svg_header(std::ostringstream& out, const std::string& title) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
        << "\" viewBox=\"0 0 " << kW << " " << kH << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << kW / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" "
           "font-family=\"sans-serif\">"
        << title << "</text>\n";
}

void svg_axes(std::ostringstream& out, const Scale& ys, const std::string& x_label,
              const std::string& y_label, int nx) {
    const int plot_w = kW - kMarginL - kMarginR, plot_h = kH - kMarginT - kMarginB;
    out << "<rect x=\"" << kMarginL << "\" y=\"" << kMarginT << "\" width=\"" << plot_w
        << "\" height=\"" << plot_h << "\" fill=\"none\" stroke=\"#444\"/>\n";
    char buf[160];
    for (int i = 0; i <= 4; ++i) {
        const double v = ys.lo + (ys.hi - ys.lo) * i / 4.0;
        const double y = ys.px(v, plot_h, kMarginT, true);
        std::snprintf(buf, sizeof buf,
                      "<text x=\"%d\" y=\"%.1f\" text-anchor=\"end\" font-size=\"11\" "
                      "font-family=\"sans-serif\">%.2f</text>\n",
                      kMarginL - 6, y + 4, v);
        out << buf;
        std::snprintf(buf, sizeof buf,
                      "<line x1=\"%d\" y1=\"%.1f\" x2=\"%d\" y2=\"%.1f\" stroke=\"#ddd\"/>\n",
                      kMarginL, y, kW - kMarginR, y);
        out << buf;
    }
    for (int i = 1; i <= nx; ++i) {
        const double x = kMarginL + plot_w * (nx == 1 ? 0.5 : (i - 1.0) / (nx - 1.0));
        std::snprintf(buf, sizeof buf,
                      "<text x=\"%.1f\" y=\"%d\" text-anchor=\"middle\" font-size=\"11\" "
                      "font-family=\"sans-serif\">%d</text>\n",
                      x, kH - kMarginB + 16, i);
        out << buf;
    }
    out << "<text x=\"" << kMarginL + plot_w / 2 << "\" y=\"" << kH - 10
        << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">" << x_label
        << "</text>\n";
    out << "<text x=\"16\" y=\"" << kMarginT + plot_h / 2
        << "\" font-size=\"12\" font-family=\"sans-serif\" transform=\"rotate(-90 16 "
        << kMarginT + plot_h / 2 << ")\" text-anchor=\"middle\">" << y_label << "</text>\n";
}

void svg_legend(std::ostringstream& out, const std::vector<PlotSeries>& series) {
    char buf[256];
    for (size_t s = 0; s < series.size(); ++s) {
        const int y = kMarginT + 14 + static_cast<int>(s) * 18;
        std::snprintf(buf, sizeof buf,
                      "<rect x=\"%d\" y=\"%d\" width=\"12\" height=\"12\" fill=\"%s\"/>"
                      "<text x=\"%d\" y=\"%d\" font-size=\"11\" "
                      "font-family=\"sans-serif\">%s</text>\n",
                      kW - kMarginR + 8, y - 10, kPalette[s % 10], kW - kMarginR + 24, y,
                      series[s].name.c_str());
        out << buf;
    }
}

Scale y_scale(const std::vector<PlotSeries>& series) {
    double lo = 1e300, hi = -1e300;
    for (const auto& s : series)
        for (double v : s.values) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    if (lo > hi) {
        lo = 0;
        hi = 1;
    }
    const double pad = (hi - lo) * 0.08 + 1e-6;
    lo = std::max(0.0, lo - pad);
    hi = std::min(1.0, hi + pad) > lo ? std::min(1.0 + 0.0, hi + pad) : hi + pad;
    return {lo, hi};
}

} // namespace

std::string svg_line_chart(const std::string& title, const std::string& x_label,
                           const std::string& y_label, const std::vector<PlotSeries>& series) {
    std::ostringstream out;
    svg_header(out, title);
    size_t nx = 1;
    for (const auto& s : series) nx = std::max(nx, s.values.size());
    const Scale ys = y_scale(series);
    svg_axes(out, ys, x_label, y_label, static_cast<int>(nx));
    const int plot_w = kW - kMarginL - kMarginR, plot_h = kH - kMarginT - kMarginB;
    char buf[96];
    for (size_t s = 0; s < series.size(); ++s) {
        const auto& v = series[s].values;
        out << "<polyline fill=\"none\" stroke=\"" << kPalette[s % 10]
            << "\" stroke-width=\"2\" points=\"";
        for (size_t i = 0; i < v.size(); ++i) {
            const double x =
                kMarginL + plot_w * (v.size() == 1 ? 0.5 : static_cast<double>(i) / (v.size() - 1));
            std::snprintf(buf, sizeof buf, "%.1f,%.1f ", x, ys.px(v[i], plot_h, kMarginT, true));
            out << buf;
        }
        out << "\"/>\n";
    }
    svg_legend(out, series);
    out << "</svg>\n";
    return out.str();
}

std::string svg_bar_chart(const std::string& title, const std::string& x_label,
                          const std::string& y_label, const std::vector<PlotSeries>& series) {
    std::ostringstream out;
    svg_header(out, title);
    size_t nx = 1;
    for (const auto& s : series) nx = std::max(nx, s.values.size());
    std::vector<PlotSeries> padded = series;
    Scale ys = y_scale(series);
    ys.lo = 0.0;
    svg_axes(out, ys, x_label, y_label, static_cast<int>(nx));
    const int plot_w = kW - kMarginL - kMarginR, plot_h = kH - kMarginT - kMarginB;
    const double group_w = static_cast<double>(plot_w) / nx;
    const double bar_w = group_w * 0.8 / std::max<size_t>(1, series.size());
    char buf[160];
    for (size_t s = 0; s < series.size(); ++s) {
        for (size_t i = 0; i < series[s].values.size(); ++i) {
            const double v = series[s].values[i];
            const double x = kMarginL + group_w * i + group_w * 0.1 + bar_w * s;
            const double y = ys.px(v, plot_h, kMarginT, true);
            std::snprintf(buf, sizeof buf,
                          "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" "
                          "fill=\"%s\"/>\n",
                          x, y, bar_w, kMarginT + plot_h - y, kPalette[s % 10]);
            out << buf;
        }
    }
    svg_legend(out, series);
    out << "</svg>\n";
    return out.str();
}

std::vector<std::string> export_transform_images(const Assembly& a, const std::string& dir,
                                                 const std::string& prefix) {
    std::vector<std::string> written;
    fs::create_directories(dir);
    for (int i = 0; i < a.transform_count(); ++i) {
        const TransformParams& t = a.transform(i);
        const Tensor canvas = frame_to_canvas(t);
        const int c = canvas.dim(0), h = canvas.dim(1), w = canvas.dim(2);
        double lo = 1e300, hi = -1e300;
        for (double v : canvas.data) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (hi <= lo) hi = lo + 1.0;
        io::Image8 img;
        img.width = w;
        img.height = h;
        img.channels = c >= 3 ? 3 : 1;
        img.pixels.resize(static_cast<size_t>(w) * h * img.channels);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                for (int ch = 0; ch < img.channels; ++ch) {
                    const double v =
                        canvas.data[(static_cast<size_t>(std::min(ch, c - 1)) * h + y) * w + x];
                    img.pixels[(static_cast<size_t>(y) * w + x) * img.channels + ch] =
                        static_cast<uint8_t>(std::lround(255.0 * (v - lo) / (hi - lo)));
                }
        const std::string label =
            t.owner_task >= 0 ? "task" + std::to_string(t.owner_task) : "shared";
        const std::string path =
            (fs::path(dir) / (prefix + "_" + to_string(t.kind) + "_" + label + ".png")).string();
        io::write_png(path, img);
        written.push_back(path);
    }
    return written;
}

std::vector<std::string> plot_runs(const std::vector<std::string>& run_dirs,
                                   const std::string& out_dir) {
    if (run_dirs.empty()) throw MissingMatrix("no run directories given");
    fs::create_directories(out_dir);
    std::vector<std::string> written;

    std::vector<PlotSeries> trajectories, final_tasks;
    for (const std::string& dir : run_dirs) {
        const fs::path mpath = fs::path(dir) / "matrix.csv";
        std::ifstream f(mpath);
        if (!f) throw MissingMatrix(mpath.string());
        std::stringstream ss;
        ss << f.rdbuf();
        const AccuracyMatrix m = AccuracyMatrix::from_csv(ss.str());
        const MetricsReport rep = metrics_report(m);
        const std::string name = fs::path(dir).parent_path().filename().string() + "/" +
                                 fs::path(dir).filename().string();
        trajectories.push_back({name, rep.accuracy_trajectory});
        final_tasks.push_back({name, rep.final_task_accuracies});
    }
    {
        const std::string path = (fs::path(out_dir) / "avg_accuracy.svg").string();
        std::ofstream f(path);
        f << svg_line_chart("average accuracy over the learning sequence", "session",
                            "avg accuracy", trajectories);
        written.push_back(path);
    }
    {
        const std::string path = (fs::path(out_dir) / "task_accuracy.svg").string();
        std::ofstream f(path);
        f << svg_bar_chart("per-task accuracy at the end of the sequence", "task",
                           "accuracy", final_tasks);
        written.push_back(path);
    }

    // transform visualizations from the newest checkpoint of each run
    for (const std::string& dir : run_dirs) {
        const fs::path ckdir = fs::path(dir) / "checkpoints";
        if (!fs::exists(ckdir)) continue;
        std::vector<fs::path> ckpts;
        for (const auto& e : fs::directory_iterator(ckdir))
            if (e.path().extension() == ".ckpt") ckpts.push_back(e.path());
        if (ckpts.empty()) continue;
        std::sort(ckpts.begin(), ckpts.end());
        Assembly a = io::load_assembly(ckpts.back().string());
        if (a.transform_count() == 0) continue;
        const std::string prefix = fs::path(dir).parent_path().filename().string() + "_" +
                                   fs::path(dir).filename().string();
        const auto files = export_transform_images(a, out_dir, prefix);
        written.insert(written.end(), files.begin(), files.end());
    }
    return written;
}

} // namespace itcl
