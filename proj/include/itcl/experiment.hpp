#pragma once

#include <nlohmann/json.hpp>

#include "itcl/pretrain.hpp"
#include "itcl/trainer.hpp"

namespace itcl {

struct StreamSpec {
    std::string kind = "synthetic"; // synthetic | synthetic_multisource |
                                    // synthetic_domain_incremental | directory
    StreamMode mode = StreamMode::class_incremental;
    int num_tasks = 4;
    int classes_per_task = 3;
    int samples_per_class = 60;
    int num_classes = 4;  // domain-incremental kinds
    int num_domains = 2;  // multisource kinds
    std::vector<int> image = {3, 24, 24};
    uint64_t seed = 7;
    double noise = 0.3;
    std::string root;               // directory kind (class-incremental)
    std::vector<std::string> roots; // directory kind (domain-incremental)
};

struct BackboneSpec {
    std::string variant = "tiny";
    int input_side = 24;
    int in_channels = 3;
    std::string checkpoint;   // load path; empty -> synthetic pretraining
    PretrainSpec pretrain;    // used when checkpoint is empty
    std::string bn_policy = "running";
};

struct ExperimentConfig {
    std::string experiment = "experiment";
    std::string out_dir = "runs";
    std::vector<uint64_t> seeds = {0};
    StreamSpec stream;
    BackboneSpec backbone;
    TuningStrategy strategy;
    TrainConfig train;
    bool save_checkpoints = true;
    bool export_predictions = false;
    bool deterministic = false; // recorded; the cpu backend is already
                                // reduction-order stable

    // Strict parse: unknown keys are errors, incompatible (strategy, mode)
    // pairs are rejected before any run starts.
    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig from_file(const std::string& path);
    nlohmann::json to_json() const; // effective config, defaults resolved
    void validate() const;
};

// "<kind>[:parallel][-<regularizer>]", hyperparameters from `base`.
TuningStrategy strategy_from_name(const std::string& name, const TuningStrategy& base);
std::string strategy_label(const TuningStrategy& s);

TaskStream build_stream(const StreamSpec& spec);
Backbone build_backbone(const BackboneSpec& spec, const std::string& cache_dir);

// Learnt parameters beyond the always-trained head (Table-style counts).
int64_t extra_learnt_params(const ExperimentConfig& cfg);

struct SeedOutcome {
    uint64_t seed = 0;
    std::string dir;
    AccuracyMatrix matrix;
    MetricsReport report;
};

struct AggregateOutcome {
    std::string label;
    int64_t extra_params = 0;
    double accuracy_mean = 0.0, accuracy_std = 0.0;
    double forgetting_mean = 0.0, forgetting_std = 0.0;
    std::vector<SeedOutcome> seeds;
};

nlohmann::json aggregate_json(const AggregateOutcome& agg);

// Runs every seed of one strategy; writes per-seed run directories
// (config.json, matrix.csv, report.json, train_log.jsonl, checkpoints/) and
// the aggregate report. `jobs` seeds may run as parallel workers.
AggregateOutcome run_experiment(const ExperimentConfig& cfg, int jobs = 1);

std::vector<AggregateOutcome> run_sweep(const ExperimentConfig& base,
                                        const std::vector<std::string>& strategy_names,
                                        int jobs = 1);
std::string sweep_csv(const std::vector<AggregateOutcome>& rows);
std::string sweep_table(const std::vector<AggregateOutcome>& rows);

} // namespace itcl
