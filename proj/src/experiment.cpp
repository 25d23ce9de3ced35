#include "itcl/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "itcl/dataset_io.hpp"
#include "itcl/io/checkpoint.hpp"
#include "itcl/rng.hpp"

namespace itcl {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// strict config parsing
// ---------------------------------------------------------------------------

namespace {

void reject_unknown(const json& j, const std::vector<std::string>& known,
                    const std::string& path) {
    for (const auto& [key, value] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ConfigInvalid("unknown key '" + path + key + "'");
    }
}

StreamMode mode_from_string(const std::string& s) {
    if (s == "class_incremental") return StreamMode::class_incremental;
    if (s == "domain_incremental") return StreamMode::domain_incremental;
    throw ConfigInvalid("unknown stream mode '" + s + "'");
}

std::string mode_to_string(StreamMode m) {
    return m == StreamMode::class_incremental ? "class_incremental" : "domain_incremental";
}

StreamSpec stream_from_json(const json& j) {
    reject_unknown(j,
                   {"kind", "mode", "num_tasks", "classes_per_task", "samples_per_class",
                    "num_classes", "num_domains", "image", "seed", "noise", "root", "roots"},
                   "stream.");
    StreamSpec s;
    s.kind = j.value("kind", s.kind);
    if (s.kind == "synthetic" || s.kind == "synthetic_multisource" || s.kind == "directory")
        s.mode = StreamMode::class_incremental;
    else if (s.kind == "synthetic_domain_incremental")
        s.mode = StreamMode::domain_incremental;
    else
        throw ConfigInvalid("unknown stream kind '" + s.kind + "'");
    if (j.contains("mode")) s.mode = mode_from_string(j.at("mode").get<std::string>());
    s.num_tasks = j.value("num_tasks", s.num_tasks);
    s.classes_per_task = j.value("classes_per_task", s.classes_per_task);
    s.samples_per_class = j.value("samples_per_class", s.samples_per_class);
    s.num_classes = j.value("num_classes", s.num_classes);
    s.num_domains = j.value("num_domains", s.num_domains);
    if (j.contains("image")) s.image = j.at("image").get<std::vector<int>>();
    s.seed = j.value("seed", s.seed);
    s.noise = j.value("noise", s.noise);
    s.root = j.value("root", s.root);
    if (j.contains("roots")) s.roots = j.at("roots").get<std::vector<std::string>>();
    if (s.image.size() != 3) throw ConfigInvalid("stream.image must be [C,H,W]");
    if (s.kind == "synthetic" && s.mode != StreamMode::class_incremental)
        throw ConfigInvalid("stream kind 'synthetic' is class-incremental");
    if (s.kind == "synthetic_domain_incremental" && s.mode != StreamMode::domain_incremental)
        throw ConfigInvalid("stream kind 'synthetic_domain_incremental' is domain-incremental");
    if (s.kind == "directory" && s.mode == StreamMode::class_incremental && s.root.empty())
        throw ConfigInvalid("directory stream needs 'root'");
    if (s.kind == "directory" && s.mode == StreamMode::domain_incremental && s.roots.empty())
        throw ConfigInvalid("domain-incremental directory stream needs 'roots'");
    return s;
}

json stream_to_json(const StreamSpec& s) {
    json j = {{"kind", s.kind},
              {"mode", mode_to_string(s.mode)},
              {"num_tasks", s.num_tasks},
              {"classes_per_task", s.classes_per_task},
              {"samples_per_class", s.samples_per_class},
              {"num_classes", s.num_classes},
              {"num_domains", s.num_domains},
              {"image", s.image},
              {"seed", s.seed},
              {"noise", s.noise}};
    if (!s.root.empty()) j["root"] = s.root;
    if (!s.roots.empty()) j["roots"] = s.roots;
    return j;
}

PretrainSpec pretrain_from_json(const json& j) {
    reject_unknown(j, {"classes", "samples_per_class", "epochs", "batch_size", "lr", "seed",
                       "noise"},
                   "backbone.pretrain.");
    PretrainSpec p;
    p.classes = j.value("classes", p.classes);
    p.samples_per_class = j.value("samples_per_class", p.samples_per_class);
    p.epochs = j.value("epochs", p.epochs);
    p.batch_size = j.value("batch_size", p.batch_size);
    p.lr = j.value("lr", p.lr);
    p.seed = j.value("seed", p.seed);
    p.noise = j.value("noise", p.noise);
    return p;
}

json pretrain_to_json(const PretrainSpec& p) {
    return {{"classes", p.classes},
            {"samples_per_class", p.samples_per_class},
            {"epochs", p.epochs},
            {"batch_size", p.batch_size},
            {"lr", p.lr},
            {"seed", p.seed},
            {"noise", p.noise}};
}

BackboneSpec backbone_from_json(const json& j) {
    reject_unknown(j, {"variant", "input_side", "in_channels", "checkpoint", "pretrain",
                       "bn_policy"},
                   "backbone.");
    BackboneSpec b;
    b.variant = j.value("variant", b.variant);
    b.input_side = j.value("input_side", b.input_side);
    b.in_channels = j.value("in_channels", b.in_channels);
    b.checkpoint = j.value("checkpoint", b.checkpoint);
    if (j.contains("pretrain")) b.pretrain = pretrain_from_json(j.at("pretrain"));
    b.bn_policy = j.value("bn_policy", b.bn_policy);
    if (b.bn_policy != "running" && b.bn_policy != "frozen_pretrained")
        throw ConfigInvalid("backbone.bn_policy must be running or frozen_pretrained");
    if (b.variant != "tiny" && b.variant != "resnet18")
        throw ConfigInvalid("backbone.variant must be tiny or resnet18");
    return b;
}

json backbone_to_json(const BackboneSpec& b) {
    json j = {{"variant", b.variant},
              {"input_side", b.input_side},
              {"in_channels", b.in_channels},
              {"pretrain", pretrain_to_json(b.pretrain)},
              {"bn_policy", b.bn_policy}};
    if (!b.checkpoint.empty()) j["checkpoint"] = b.checkpoint;
    return j;
}

RegularizerConfig regularizer_from_json(const json& j) {
    reject_unknown(j, {"kind", "lambda", "temperature", "alpha", "beta", "gamma", "damping",
                       "lwf_weight", "fisher_max_samples"},
                   "strategy.regularizer.");
    RegularizerConfig r;
    r.kind = regularizer_kind_from_string(j.value("kind", "none"));
    r.lambda = r.kind == RegularizerKind::ewc ? 5000.0 : 1.0;
    r.lambda = j.value("lambda", r.lambda);
    r.temperature = j.value("temperature", r.temperature);
    r.alpha = j.value("alpha", r.alpha);
    r.beta = j.value("beta", r.beta);
    r.gamma = j.value("gamma", r.gamma);
    r.damping = j.value("damping", r.damping);
    r.lwf_weight = j.value("lwf_weight", r.lwf_weight);
    r.fisher_max_samples = j.value("fisher_max_samples", r.fisher_max_samples);
    return r;
}

json regularizer_to_json(const RegularizerConfig& r) {
    return {{"kind", to_string(r.kind)},
            {"lambda", r.lambda},
            {"temperature", r.temperature},
            {"alpha", r.alpha},
            {"beta", r.beta},
            {"gamma", r.gamma},
            {"damping", r.damping},
            {"lwf_weight", r.lwf_weight},
            {"fisher_max_samples", r.fisher_max_samples}};
}

TransformConfig transform_from_json(const json& j) {
    reject_unknown(j, {"kind", "thickness", "side", "channels", "insertion_point",
                       "freeze_after_first_task", "interpolation"},
                   "strategy.transform.");
    TransformConfig t;
    t.kind = transform_kind_from_string(j.value("kind", "pad"));
    t.thickness = j.value("thickness", t.thickness);
    t.side = j.value("side", t.side);
    t.channels = j.value("channels", t.channels);
    t.insertion_point = j.value("insertion_point", t.insertion_point);
    t.freeze_after_first_task = j.value("freeze_after_first_task", t.freeze_after_first_task);
    const std::string interp = j.value("interpolation", "bilinear");
    if (interp != "bilinear" && interp != "nearest")
        throw ConfigInvalid("interpolation must be bilinear or nearest");
    t.interpolation = interp == "bilinear" ? Interp::bilinear : Interp::nearest;
    return t;
}

json transform_to_json(const TransformConfig& t) {
    return {{"kind", to_string(t.kind)},
            {"thickness", t.thickness},
            {"side", t.side},
            {"channels", t.channels},
            {"insertion_point", t.insertion_point},
            {"freeze_after_first_task", t.freeze_after_first_task},
            {"interpolation", t.interpolation == Interp::bilinear ? "bilinear" : "nearest"}};
}

TuningStrategy strategy_from_json(const json& j) {
    reject_unknown(j, {"kind", "transform_mode", "transform", "regularizer"}, "strategy.");
    TuningStrategy s;
    s.kind = strategy_kind_from_string(j.value("kind", "none"));
    const std::string tm = j.value("transform_mode", "shared");
    if (tm != "shared" && tm != "per_task")
        throw ConfigInvalid("transform_mode must be shared or per_task");
    s.transform_mode = tm == "shared" ? TransformMode::shared : TransformMode::per_task;
    if (j.contains("transform")) s.transform = transform_from_json(j.at("transform"));
    if (s.kind == StrategyKind::it_add) s.transform.kind = TransformKind::add;
    if (j.contains("regularizer")) s.regularizer = regularizer_from_json(j.at("regularizer"));
    return s;
}

json strategy_to_json(const TuningStrategy& s) {
    return {{"kind", to_string(s.kind)},
            {"transform_mode", s.transform_mode == TransformMode::shared ? "shared" : "per_task"},
            {"transform", transform_to_json(s.transform)},
            {"regularizer", regularizer_to_json(s.regularizer)}};
}

TrainConfig train_from_json(const json& j) {
    reject_unknown(j, {"epochs_per_session", "online", "batch_size", "lr_head", "lr_backbone",
                       "weight_decay", "device"},
                   "train.");
    TrainConfig t;
    t.epochs_per_session = j.value("epochs_per_session", t.epochs_per_session);
    t.online = j.value("online", t.online);
    t.batch_size = j.value("batch_size", t.batch_size);
    t.lr_head = j.value("lr_head", t.lr_head);
    t.lr_backbone = j.value("lr_backbone", t.lr_backbone);
    t.weight_decay = j.value("weight_decay", t.weight_decay);
    t.device = j.value("device", t.device);
    if (t.epochs_per_session < 1 || t.batch_size < 1)
        throw ConfigInvalid("train.epochs_per_session and batch_size must be >= 1");
    if (t.device != "cpu")
        throw ConfigInvalid("device '" + t.device + "' unavailable; this build is cpu-only");
    return t;
}

json train_to_json(const TrainConfig& t) {
    return {{"epochs_per_session", t.epochs_per_session},
            {"online", t.online},
            {"batch_size", t.batch_size},
            {"lr_head", t.lr_head},
            {"lr_backbone", t.lr_backbone},
            {"weight_decay", t.weight_decay},
            {"device", t.device}};
}

} // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    reject_unknown(j,
                   {"experiment", "out_dir", "seeds", "stream", "backbone", "strategy", "train",
                    "save_checkpoints", "export_predictions", "deterministic"},
                   "");
    ExperimentConfig c;
    try {
        c.experiment = j.value("experiment", c.experiment);
        c.out_dir = j.value("out_dir", c.out_dir);
        if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<uint64_t>>();
        if (j.contains("stream")) c.stream = stream_from_json(j.at("stream"));
        if (j.contains("backbone")) c.backbone = backbone_from_json(j.at("backbone"));
        if (j.contains("strategy")) c.strategy = strategy_from_json(j.at("strategy"));
        if (j.contains("train")) c.train = train_from_json(j.at("train"));
        c.save_checkpoints = j.value("save_checkpoints", c.save_checkpoints);
        c.export_predictions = j.value("export_predictions", c.export_predictions);
        c.deterministic = j.value("deterministic", c.deterministic);
    } catch (const json::exception& e) {
        throw ConfigInvalid(std::string("malformed config value: ") + e.what());
    }
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigInvalid("cannot read config '" + path + "'");
    json j;
    try {
        j = json::parse(f);
    } catch (const json::parse_error& e) {
        throw ConfigInvalid("json parse error in '" + path + "': " + e.what());
    }
    return from_json(j);
}

json ExperimentConfig::to_json() const {
    return {{"experiment", experiment},
            {"out_dir", out_dir},
            {"seeds", seeds},
            {"stream", stream_to_json(stream)},
            {"backbone", backbone_to_json(backbone)},
            {"strategy", strategy_to_json(strategy)},
            {"train", train_to_json(train)},
            {"save_checkpoints", save_checkpoints},
            {"export_predictions", export_predictions},
            {"deterministic", deterministic}};
}

void ExperimentConfig::validate() const {
    if (seeds.empty()) throw ConfigInvalid("seeds list is empty");
    try {
        strategy.validate(stream.mode);
    } catch (const IncompatibleStrategy& e) {
        // incompatible (strategy, mode) pairs fail at parse time, like the
        // blank cells in a comparison table
        throw ConfigInvalid(e.what());
    }
    // images are resized by the pipeline; only the channel count is pinned
    if (stream.image[0] != backbone.in_channels)
        throw ConfigInvalid("stream channels do not match the backbone");
}

TuningStrategy strategy_from_name(const std::string& name, const TuningStrategy& base) {
    TuningStrategy s = base;
    std::string rest = name;
    s.transform_mode = TransformMode::shared;
    const size_t colon = rest.find(":parallel");
    if (colon != std::string::npos) {
        s.transform_mode = TransformMode::per_task;
        rest = rest.substr(0, colon);
    }
    s.regularizer.kind = RegularizerKind::none;
    const size_t dash = rest.find('-');
    if (dash != std::string::npos) {
        s.regularizer = base.regularizer;
        s.regularizer.kind = regularizer_kind_from_string(rest.substr(dash + 1));
        rest = rest.substr(0, dash);
    }
    s.kind = strategy_kind_from_string(rest);
    if (s.kind == StrategyKind::it_add)
        s.transform.kind = TransformKind::add;
    else if (s.transform.kind == TransformKind::add)
        s.transform.kind = TransformKind::pad;
    return s;
}

std::string strategy_label(const TuningStrategy& s) {
    std::string label = to_string(s.kind);
    if (s.uses_transform() && s.transform.kind == TransformKind::pad_latent) label += "_latent";
    if (s.regularizer.kind != RegularizerKind::none)
        label += "-" + to_string(s.regularizer.kind);
    if (s.uses_transform() && s.transform_mode == TransformMode::per_task) label += ":parallel";
    return label;
}

TaskStream build_stream(const StreamSpec& s) {
    if (s.kind == "synthetic")
        return make_synthetic_stream(s.num_tasks, s.classes_per_task, s.samples_per_class,
                                     s.image, s.seed, s.noise);
    if (s.kind == "synthetic_multisource")
        return make_synthetic_multisource_stream(s.num_domains, s.classes_per_task,
                                                 s.samples_per_class, s.image, s.seed, s.noise);
    if (s.kind == "synthetic_domain_incremental")
        return make_synthetic_domain_incremental_stream(s.num_domains, s.num_classes,
                                                        s.samples_per_class, s.image, s.seed,
                                                        s.noise);
    if (s.kind == "directory") {
        if (s.mode == StreamMode::class_incremental)
            return build_class_incremental_stream(load_directory_dataset(s.root), s.num_tasks,
                                                  s.seed);
        std::vector<LabeledDataset> domains;
        for (const std::string& r : s.roots) domains.push_back(load_directory_dataset(r));
        return build_domain_incremental_stream(domains);
    }
    throw ConfigInvalid("unknown stream kind '" + s.kind + "'");
}

Backbone build_backbone(const BackboneSpec& s, const std::string& cache_dir) {
    BackboneConfig cfg;
    cfg.variant = s.variant;
    cfg.input_side = s.input_side;
    cfg.in_channels = s.in_channels;
    cfg.bn_policy = s.bn_policy == "running" ? nn::BnPolicy::running
                                             : nn::BnPolicy::frozen_pretrained;
    if (!s.checkpoint.empty()) {
        if (!fs::exists(s.checkpoint))
            throw CheckpointMissing("backbone checkpoint '" + s.checkpoint + "'");
        Backbone b = io::load_backbone(s.checkpoint);
        b.cfg.bn_policy = cfg.bn_policy;
        return b;
    }
    std::string cache;
    if (!cache_dir.empty()) {
        char name[128];
        std::snprintf(name, sizeof name, "backbone_%s_s%d_c%d_p%llu.ckpt", s.variant.c_str(),
                      s.input_side, s.in_channels,
                      static_cast<unsigned long long>(s.pretrain.seed));
        cache = (fs::path(cache_dir) / name).string();
    }
    Backbone b = pretrained_backbone_cached(cfg, s.pretrain, cache);
    b.cfg.bn_policy = cfg.bn_policy;
    return b;
}

int64_t extra_learnt_params(const ExperimentConfig& cfg) {
    // counts beyond θ_ĉ, resolved against the concrete backbone geometry
    Backbone b = Backbone::make(
        {cfg.backbone.variant, cfg.backbone.input_side, cfg.backbone.in_channels,
         nn::BnPolicy::running, {}, {}},
        0);
    switch (cfg.strategy.kind) {
        case StrategyKind::none: return 0;
        case StrategyKind::bias_tuning: {
            nn::ParamRefs refs;
            b.collect(refs);
            int64_t n = 0;
            for (auto& [name, p] : refs)
                if (name.size() > 5 && name.compare(name.size() - 5, 5, ".beta") == 0)
                    n += p->numel();
            return n;
        }
        case StrategyKind::ft1:
        case StrategyKind::ft2: {
            const auto& names =
                cfg.strategy.kind == StrategyKind::ft1 ? b.cfg.last_block : b.cfg.last_two_blocks;
            int64_t n = 0;
            for (const std::string& bn : names)
                n += b.blocks[static_cast<size_t>(b.unit_index(bn) - 1)].param_count();
            return n;
        }
        case StrategyKind::it_pad:
        case StrategyKind::it_add:
        case StrategyKind::it_pad_plus_bias: {
            TuningStrategy s = cfg.strategy;
            Assembly a = Assembly::assemble(std::move(b), 1, s, 0);
            int64_t n = param_count(a.strategy.transform);
            if (cfg.strategy.kind == StrategyKind::it_pad_plus_bias) {
                nn::ParamRefs refs;
                a.backbone.collect(refs);
                for (auto& [name, p] : refs)
                    if (name.size() > 5 && name.compare(name.size() - 5, 5, ".beta") == 0)
                        n += p->numel();
            }
            return n;
        }
    }
    return 0;
}

// ---------------------------------------------------------------------------
// runs
// ---------------------------------------------------------------------------

namespace {

void mean_std(const std::vector<double>& v, double& mean, double& stdev) {
    mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    stdev = std::sqrt(var / static_cast<double>(v.size())); // population std
}

SeedOutcome run_one_seed(const ExperimentConfig& cfg, const Backbone& backbone,
                         const TaskStream& stream, uint64_t seed, const std::string& dir) {
    fs::create_directories(dir);

    ExperimentConfig effective = cfg;
    effective.seeds = {seed};
    {
        std::ofstream f(fs::path(dir) / "config.json");
        f << effective.to_json().dump(2) << "\n";
    }
    std::ofstream log(fs::path(dir) / "train_log.jsonl");

    TrainConfig train = cfg.train;
    train.seed = seed;
    train.bn_policy = cfg.backbone.bn_policy == "running" ? nn::BnPolicy::running
                                                          : nn::BnPolicy::frozen_pretrained;
    RunArtifacts artifacts;
    artifacts.dir = dir;
    artifacts.save_checkpoints = cfg.save_checkpoints;
    artifacts.export_predictions = cfg.export_predictions;
    artifacts.log = &log;

    SequenceResult res = run_sequence(backbone, stream, cfg.strategy, train, &artifacts);

    SeedOutcome out;
    out.seed = seed;
    out.dir = dir;
    out.matrix = res.matrix;
    out.report = metrics_report(res.matrix);
    return out;
}

} // namespace

nlohmann::json aggregate_json(const AggregateOutcome& agg) {
    json seeds = json::array();
    for (const SeedOutcome& s : agg.seeds)
        seeds.push_back({{"seed", s.seed},
                         {"dir", s.dir},
                         {"average_accuracy", s.report.final_average_accuracy},
                         {"average_forgetting", s.report.final_average_forgetting}});
    return {{"strategy", agg.label},
            {"extra_learnt_params", agg.extra_params},
            {"accuracy_mean", agg.accuracy_mean},
            {"accuracy_std", agg.accuracy_std},
            {"forgetting_mean", agg.forgetting_mean},
            {"forgetting_std", agg.forgetting_std},
            {"seeds", seeds}};
}

AggregateOutcome run_experiment(const ExperimentConfig& cfg, int jobs) {
    cfg.validate();
    const std::string label = strategy_label(cfg.strategy);
    const fs::path strategy_dir = fs::path(cfg.out_dir) / cfg.experiment / label;
    fs::create_directories(strategy_dir);

    const TaskStream stream = build_stream(cfg.stream);
    const Backbone backbone =
        build_backbone(cfg.backbone, (fs::path(cfg.out_dir) / "_cache").string());

    AggregateOutcome agg;
    agg.label = label;
    agg.extra_params = extra_learnt_params(cfg);
    agg.seeds.resize(cfg.seeds.size());

    const int workers = std::max(1, jobs);
    std::vector<std::thread> pool;
    std::atomic<size_t> next{0};
    auto work = [&]() {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= cfg.seeds.size()) return;
            const uint64_t seed = cfg.seeds[i];
            const std::string dir =
                (strategy_dir / ("seed_" + std::to_string(seed))).string();
            agg.seeds[i] = run_one_seed(cfg, backbone, stream, seed, dir);
        }
    };
    if (workers == 1) {
        work();
    } else {
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }

    std::vector<double> accs, forgets;
    for (const SeedOutcome& s : agg.seeds) {
        accs.push_back(s.report.final_average_accuracy);
        forgets.push_back(s.report.final_average_forgetting);
    }
    mean_std(accs, agg.accuracy_mean, agg.accuracy_std);
    mean_std(forgets, agg.forgetting_mean, agg.forgetting_std);

    std::ofstream f(strategy_dir / "aggregate.json");
    f << aggregate_json(agg).dump(2) << "\n";
    return agg;
}

std::vector<AggregateOutcome> run_sweep(const ExperimentConfig& base,
                                        const std::vector<std::string>& strategy_names,
                                        int jobs) {
    if (strategy_names.empty()) throw ConfigInvalid("sweep needs a non-empty strategy list");
    std::vector<AggregateOutcome> rows;
    for (const std::string& name : strategy_names) {
        ExperimentConfig cfg = base;
        cfg.strategy = strategy_from_name(name, base.strategy);
        cfg.validate();
        rows.push_back(run_experiment(cfg, jobs));
    }
    return rows;
}

std::string sweep_csv(const std::vector<AggregateOutcome>& rows) {
    std::ostringstream out;
    out << "strategy,extra_learnt_params,accuracy_mean,accuracy_std,forgetting_mean,"
           "forgetting_std\n";
    char buf[256];
    for (const AggregateOutcome& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%lld,%.6f,%.6f,%.6f,%.6f\n", r.label.c_str(),
                      static_cast<long long>(r.extra_params), r.accuracy_mean, r.accuracy_std,
                      r.forgetting_mean, r.forgetting_std);
        out << buf;
    }
    return out.str();
}

std::string sweep_table(const std::vector<AggregateOutcome>& rows) {
    std::ostringstream out;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-24s %14s %20s %20s\n", "strategy", "extra params",
                  "accuracy", "forgetting");
    out << buf;
    for (const AggregateOutcome& r : rows) {
        std::snprintf(buf, sizeof buf, "%-24s %14lld %10.4f ± %.4f %10.4f ± %.4f\n",
                      r.label.c_str(), static_cast<long long>(r.extra_params), r.accuracy_mean,
                      r.accuracy_std, r.forgetting_mean, r.forgetting_std);
        out << buf;
    }
    return out.str();
}

} // namespace itcl
