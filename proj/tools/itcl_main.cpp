#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "itcl/experiment.hpp"
#include "itcl/kernels.hpp"
#include "itcl/plots.hpp"

namespace fs = std::filesystem;
using namespace itcl;

namespace {

// splits "a,b,c"
std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

void check_device_env() {
    if (const char* dev = std::getenv("ITCL_DEVICE")) {
        if (std::string(dev) != "cpu")
            throw ConfigInvalid("ITCL_DEVICE='" + std::string(dev) +
                                "' unsupported; this build is cpu-only");
    }
}

ExperimentConfig load_config(const std::string& path, const std::string& out_override,
                             const std::string& seeds_override, bool deterministic) {
    ExperimentConfig cfg = ExperimentConfig::from_file(path);
    if (!out_override.empty()) cfg.out_dir = out_override;
    if (!seeds_override.empty()) {
        cfg.seeds.clear();
        for (const std::string& s : split_csv(seeds_override))
            cfg.seeds.push_back(std::stoull(s));
        if (cfg.seeds.empty()) throw ConfigInvalid("--seeds produced an empty list");
    }
    if (deterministic) cfg.deterministic = true;
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"input-tuning continual learning experiments"};
    app.require_subcommand(1);

    std::string config_path, out_dir, seeds_csv, strategies_csv;
    int jobs = 1;
    bool deterministic = false;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        auto* opt = cmd->add_option("--config", config_path, "experiment config (json)");
        if (needs_config) opt->required();
        cmd->add_option("--out", out_dir, "output root (overrides out_dir)");
        cmd->add_option("--seeds", seeds_csv, "comma-separated seed list override");
        cmd->add_option("--jobs", jobs, "parallel (seed,strategy) worker count");
        cmd->add_flag("--deterministic", deterministic,
                      "record the deterministic flag (the cpu backend is always "
                      "reduction-order stable)");
    };

    CLI::App* run = app.add_subcommand("run", "run one strategy over all seeds");
    add_common(run, true);

    CLI::App* sweep = app.add_subcommand("sweep", "compare strategies on one stream");
    add_common(sweep, true);
    sweep->add_option("--strategies", strategies_csv,
                      "comma-separated strategy names, e.g. none,it_pad,ft2-ewc,"
                      "it_pad:parallel")
        ->required();

    CLI::App* plot = app.add_subcommand("plot", "emit figures for completed runs");
    std::vector<std::string> run_dirs;
    std::string fig_dir = "figures";
    plot->add_option("runs", run_dirs, "run directories (each holding matrix.csv)")
        ->required();
    plot->add_option("--out", fig_dir, "figure output directory");

    CLI::App* report = app.add_subcommand("report", "recompute metrics for a run directory");
    std::string report_dir;
    report->add_option("run", report_dir, "run directory holding matrix.csv")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        check_device_env();
        if (app.got_subcommand(run)) {
            const ExperimentConfig cfg =
                load_config(config_path, out_dir, seeds_csv, deterministic);
            const AggregateOutcome agg = run_experiment(cfg, jobs);
            std::cout << sweep_table({agg});
        } else if (app.got_subcommand(sweep)) {
            const ExperimentConfig cfg =
                load_config(config_path, out_dir, seeds_csv, deterministic);
            const std::vector<std::string> names = split_csv(strategies_csv);
            const auto rows = run_sweep(cfg, names, jobs);
            const fs::path dir = fs::path(cfg.out_dir) / cfg.experiment;
            fs::create_directories(dir);
            std::ofstream csv(dir / "sweep.csv");
            csv << sweep_csv(rows);
            std::ofstream txt(dir / "sweep.txt");
            txt << sweep_table(rows);
            std::cout << sweep_table(rows);
        } else if (app.got_subcommand(plot)) {
            const auto files = plot_runs(run_dirs, fig_dir);
            for (const std::string& f : files) std::cout << f << "\n";
        } else if (app.got_subcommand(report)) {
            std::ifstream f(fs::path(report_dir) / "matrix.csv");
            if (!f) throw MissingMatrix((fs::path(report_dir) / "matrix.csv").string());
            std::stringstream ss;
            ss << f.rdbuf();
            const AccuracyMatrix m = AccuracyMatrix::from_csv(ss.str());
            std::cout << metrics_report_text(metrics_report(m));
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return 0;
}
