#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "itcl/experiment.hpp"
#include "itcl/plots.hpp"

using namespace itcl;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

json small_config_json(const std::string& out_dir) {
    return json{{"experiment", "probe"},
                {"out_dir", out_dir},
                {"seeds", {0, 1}},
                {"stream",
                 {{"kind", "synthetic"},
                  {"num_tasks", 2},
                  {"classes_per_task", 2},
                  {"samples_per_class", 10},
                  {"image", {3, 16, 16}},
                  {"seed", 5}}},
                {"backbone",
                 {{"variant", "tiny"},
                  {"input_side", 16},
                  {"pretrain",
                   {{"classes", 3}, {"samples_per_class", 8}, {"epochs", 1}, {"seed", 7}}}}},
                {"strategy", {{"kind", "it_pad"}, {"transform", {{"thickness", 2}}}}},
                {"train", {{"epochs_per_session", 2}, {"batch_size", 8}}}};
}

} // namespace

TEST_CASE("config parsing: defaults, unknown keys, bad pairs") {
    SUBCASE("defaults fill in") {
        const ExperimentConfig c = ExperimentConfig::from_json(
            json{{"stream", {{"kind", "synthetic"}}}});
        CHECK(c.train.epochs_per_session == 20);
        CHECK(c.strategy.kind == StrategyKind::none);
        CHECK(c.seeds == std::vector<uint64_t>{0});
    }
    SUBCASE("unknown keys are errors at every level") {
        CHECK_THROWS_AS(ExperimentConfig::from_json(json{{"experimnet", "typo"}}),
                        ConfigInvalid);
        CHECK_THROWS_AS(ExperimentConfig::from_json(json{{"stream", {{"tasks", 4}}}}),
                        ConfigInvalid);
        CHECK_THROWS_AS(
            ExperimentConfig::from_json(json{{"train", {{"epochs", 3}}}}),
            ConfigInvalid);
        CHECK_THROWS_AS(ExperimentConfig::from_json(
                            json{{"strategy", {{"regularizer", {{"lamda", 1.0}}}}}}),
                        ConfigInvalid);
    }
    SUBCASE("lwf on a domain-incremental stream is rejected at parse time") {
        const json j = {{"stream", {{"kind", "synthetic_domain_incremental"}}},
                        {"strategy",
                         {{"kind", "ft1"}, {"regularizer", {{"kind", "lwf"}}}}}};
        CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigInvalid);
    }
    SUBCASE("regularizers only attach to ft kinds") {
        const json j = {{"strategy",
                         {{"kind", "it_pad"}, {"regularizer", {{"kind", "ewc"}}}}}};
        CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigInvalid);
    }
    SUBCASE("ewc lambda defaults to 5000, path integral to 1") {
        const ExperimentConfig c = ExperimentConfig::from_json(
            json{{"strategy", {{"kind", "ft2"}, {"regularizer", {{"kind", "ewc"}}}}}});
        CHECK(c.strategy.regularizer.lambda == 5000.0);
        const ExperimentConfig p = ExperimentConfig::from_json(json{
            {"strategy", {{"kind", "ft2"}, {"regularizer", {{"kind", "path_integral"}}}}}});
        CHECK(p.strategy.regularizer.lambda == 1.0);
    }
    SUBCASE("non-cpu device is rejected") {
        CHECK_THROWS_AS(
            ExperimentConfig::from_json(json{{"train", {{"device", "cuda"}}}}),
            ConfigInvalid);
    }
}

TEST_CASE("effective config snapshot round-trips exactly") {
    const ExperimentConfig c = ExperimentConfig::from_json(small_config_json("runs"));
    const json snapshot = c.to_json();
    const ExperimentConfig re = ExperimentConfig::from_json(snapshot);
    CHECK(re.to_json() == snapshot);
}

TEST_CASE("strategy names parse into strategies") {
    TuningStrategy base;
    base.transform.thickness = 3;
    CHECK(strategy_from_name("none", base).kind == StrategyKind::none);
    const TuningStrategy ewc = strategy_from_name("ft2-ewc", base);
    CHECK(ewc.kind == StrategyKind::ft2);
    CHECK(ewc.regularizer.kind == RegularizerKind::ewc);
    const TuningStrategy par = strategy_from_name("it_pad:parallel", base);
    CHECK(par.kind == StrategyKind::it_pad);
    CHECK(par.transform_mode == TransformMode::per_task);
    CHECK(par.transform.thickness == 3);
    CHECK(strategy_from_name("it_add", base).transform.kind == TransformKind::add);
    CHECK_THROWS_AS(strategy_from_name("warp", base), ConfigInvalid);
    CHECK(strategy_label(par) == "it_pad:parallel");
    CHECK(strategy_label(ewc) == "ft2-ewc");
}

TEST_CASE("extra learnt parameter counts for the sweep column") {
    ExperimentConfig c = ExperimentConfig::from_json(small_config_json("runs"));
    c.strategy = strategy_from_name("none", c.strategy);
    CHECK(extra_learnt_params(c) == 0);
    c.strategy = strategy_from_name("it_pad", c.strategy);
    c.strategy.transform.thickness = 2;
    CHECK(extra_learnt_params(c) == 3 * (16 * 16 - 12 * 12));
    c.strategy = strategy_from_name("it_add", c.strategy);
    CHECK(extra_learnt_params(c) == 3 * 16 * 16);
    c.strategy = strategy_from_name("ft1", c.strategy);
    CHECK(extra_learnt_params(c) > 0);
}

TEST_CASE("run_experiment writes the full run layout and exact aggregates") {
    TempDir dir("itcl_exp_test");
    ExperimentConfig cfg = ExperimentConfig::from_json(small_config_json(dir.path.string()));

    const AggregateOutcome agg = run_experiment(cfg);
    CHECK(agg.seeds.size() == 2);

    const fs::path sdir = dir.path / "probe" / "it_pad";
    CHECK(fs::exists(sdir / "aggregate.json"));
    for (const uint64_t seed : {0ULL, 1ULL}) {
        const fs::path rdir = sdir / ("seed_" + std::to_string(seed));
        CHECK(fs::exists(rdir / "config.json"));
        CHECK(fs::exists(rdir / "matrix.csv"));
        CHECK(fs::exists(rdir / "report.json"));
        CHECK(fs::exists(rdir / "train_log.jsonl"));
        CHECK(fs::exists(rdir / "checkpoints" / "session_2.ckpt"));

        // the stored snapshot parses back to the effective config of this seed
        std::ifstream f(rdir / "config.json");
        const json snapshot = json::parse(f);
        const ExperimentConfig effective = ExperimentConfig::from_json(snapshot);
        CHECK(effective.to_json() == snapshot);
        CHECK(effective.seeds == std::vector<uint64_t>{seed});
    }

    SUBCASE("aggregate equals a recomputation from the persisted matrices") {
        std::vector<double> accs;
        for (const SeedOutcome& s : agg.seeds) {
            std::ifstream f(fs::path(s.dir) / "matrix.csv");
            std::stringstream ss;
            ss << f.rdbuf();
            const AccuracyMatrix m = AccuracyMatrix::from_csv(ss.str());
            accs.push_back(average_accuracy(m, m.T));
        }
        const double mean = (accs[0] + accs[1]) / 2.0;
        CHECK(agg.accuracy_mean == doctest::Approx(mean).epsilon(1e-15));
        const double var =
            ((accs[0] - mean) * (accs[0] - mean) + (accs[1] - mean) * (accs[1] - mean)) / 2.0;
        CHECK(agg.accuracy_std == doctest::Approx(std::sqrt(var)).epsilon(1e-12));
    }

    SUBCASE("rerun with identical seeds reproduces the tables") {
        const AggregateOutcome again = run_experiment(cfg);
        CHECK(again.accuracy_mean == agg.accuracy_mean);
        CHECK(again.forgetting_mean == agg.forgetting_mean);
        for (size_t i = 0; i < agg.seeds.size(); ++i)
            CHECK(again.seeds[i].matrix.to_csv() == agg.seeds[i].matrix.to_csv());
    }

    SUBCASE("plots emit figures for the completed runs") {
        const std::vector<std::string> dirs = {agg.seeds[0].dir, agg.seeds[1].dir};
        const auto files = plot_runs(dirs, (dir.path / "figs").string());
        CHECK(fs::exists(dir.path / "figs" / "avg_accuracy.svg"));
        CHECK(fs::exists(dir.path / "figs" / "task_accuracy.svg"));
        bool wrote_transform_png = false;
        for (const std::string& f : files)
            wrote_transform_png |= f.find(".png") != std::string::npos;
        CHECK(wrote_transform_png); // it_pad runs export their frames
        CHECK_THROWS_AS(plot_runs({(dir.path / "missing").string()}, (dir.path / "f2").string()),
                        MissingMatrix);
    }
}

TEST_CASE("per-task transform export writes one image per task") {
    TempDir dir("itcl_frames_test");
    BackboneConfig bcfg;
    bcfg.input_side = 16;
    Backbone bb = Backbone::make(bcfg, 3);
    TuningStrategy s;
    s.kind = StrategyKind::it_pad;
    s.transform_mode = TransformMode::per_task;
    s.transform.thickness = 2;
    Assembly a = Assembly::assemble(std::move(bb), 9, s, 0);
    for (int j = 1; j <= 3; ++j) a.ensure_task_transform(j);
    const auto files = export_transform_images(a, dir.path.string(), "demo");
    CHECK(files.size() == 3);
    for (const std::string& f : files) CHECK(fs::exists(f));
}

TEST_CASE("sweep: rows, single-seed std, empty list rejection") {
    TempDir dir("itcl_sweep_test");
    ExperimentConfig cfg = ExperimentConfig::from_json(small_config_json(dir.path.string()));
    cfg.seeds = {3};
    cfg.save_checkpoints = false;

    CHECK_THROWS_AS(run_sweep(cfg, {}), ConfigInvalid);

    const auto rows = run_sweep(cfg, {"none", "it_pad", "it_add"});
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].extra_params == 0);
    CHECK(rows[1].extra_params == 3 * (16 * 16 - 12 * 12));
    CHECK(rows[2].extra_params == 3 * 16 * 16);
    for (const auto& r : rows) CHECK(r.accuracy_std == 0.0); // one seed

    const std::string csv = sweep_csv(rows);
    CHECK(csv.find("strategy,extra_learnt_params") == 0);
    CHECK(csv.find("it_pad,336") != std::string::npos);
    const std::string table = sweep_table(rows);
    CHECK(table.find("it_add") != std::string::npos);
}
