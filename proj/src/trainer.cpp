#include "itcl/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "itcl/io/checkpoint.hpp"
#include "itcl/rng.hpp"

namespace itcl {

namespace {

namespace fs = std::filesystem;

Tensor batch_images(const std::vector<Sample>& samples, const std::vector<int>& order,
                    size_t from, size_t to, int side, Interp interp) {
    const Tensor& first = samples[static_cast<size_t>(order[from])].image;
    const int c = first.dim(0), h = first.dim(1), w = first.dim(2);
    Tensor batch({static_cast<int>(to - from), c, h, w});
    for (size_t i = from; i < to; ++i) {
        const Tensor& img = samples[static_cast<size_t>(order[i])].image;
        std::copy(img.data.begin(), img.data.end(),
                  batch.data.begin() + static_cast<int64_t>(i - from) * img.numel());
    }
    return resize_images(batch, side, interp);
}

// Adam over the trainable set: θ_g and θ_ĉ at lr_head, backbone groups at
// lr_backbone. Rebuilt at each session start.
nn::Adam make_optimizer(Assembly& a, const TrainConfig& cfg) {
    nn::Adam opt;
    opt.weight_decay = cfg.weight_decay;
    for (auto& [name, p] : a.named_trainable_params()) {
        const bool backbone_group = name.rfind("backbone.", 0) == 0;
        opt.add(p, backbone_group ? cfg.lr_backbone : cfg.lr_head);
    }
    return opt;
}

void add_flat_to_grads(const std::vector<double>& flat, const std::vector<nn::Param*>& ps) {
    size_t off = 0;
    for (nn::Param* p : ps) {
        for (double& g : p->grad.data) g += flat[off++];
    }
}

// columns of `full` selected by global class ids
Tensor gather_columns(const Tensor& full, const std::vector<int>& cols) {
    Tensor out({full.dim(0), static_cast<int>(cols.size())});
    for (int i = 0; i < full.dim(0); ++i)
        for (size_t r = 0; r < cols.size(); ++r)
            out.at2(i, static_cast<int>(r)) = full.at2(i, cols[r]);
    return out;
}

struct AssemblyFisherAdapter final : DifferentiableClassifier {
    Assembly& a;
    const std::vector<Sample>& samples;
    std::vector<int> subset;  // indices into samples
    std::vector<int> classes; // active global class ids (masked softmax support)
    int session_j;
    int side;
    Interp interp;
    std::vector<nn::Param*> params;

    AssemblyFisherAdapter(Assembly& assembly, const std::vector<Sample>& smp,
                          std::vector<int> idx, std::vector<int> cls, int j, Interp ip)
        : a(assembly), samples(smp), subset(std::move(idx)), classes(std::move(cls)),
          session_j(j), side(assembly.expected_input_side()), interp(ip),
          params(assembly.trainable_params()) {}

    int sample_count() const override { return static_cast<int>(subset.size()); }
    int class_count() const override { return static_cast<int>(classes.size()); }

    std::vector<double> forward_logits(int sample) override {
        std::vector<int> order = {subset[static_cast<size_t>(sample)]};
        Tensor x = batch_images(samples, order, 0, 1, side, interp);
        // Fisher of the model as it stands at session end: eval-mode forward
        Tensor full = a.forward_logits(x, /*training=*/false);
        std::vector<double> out(classes.size());
        for (size_t i = 0; i < classes.size(); ++i) out[i] = full.at2(0, classes[i]);
        return out;
    }

    void backward_logits(int /*sample*/, const std::vector<double>& seed) override {
        Tensor full_seed({1, a.head.total_classes});
        for (size_t i = 0; i < classes.size(); ++i) full_seed.at2(0, classes[i]) = seed[i];
        Tensor gfeat = a.head.backward_label_trick(full_seed, session_j);
        a.backward_features(gfeat);
    }

    void zero_grads() override {
        for (nn::Param* p : params) p->zero_grad();
    }
    std::vector<double> grads() const override { return nn::flatten_grads(params); }
};

void log_step(std::ostream* log, int j, int epoch, int step, double ce, double regl) {
    if (!log) return;
    nlohmann::json rec = {{"session", j}, {"epoch", epoch}, {"step", step},
                          {"loss_ce", ce}, {"loss_reg", regl}};
    (*log) << rec.dump() << "\n";
}

} // namespace

double evaluate_task(Assembly& a, const TaskStream& stream, int tau, int sessions_seen,
                     const std::string& prediction_csv) {
    const std::vector<Sample>& test = stream.session_data(tau).test;
    if (test.empty()) return 0.0;
    const bool parallel = a.uses_transform() && a.strategy.transform_mode == TransformMode::per_task;
    const int side = a.expected_input_side();
    const Interp interp = a.strategy.transform.interpolation;

    std::ofstream csv;
    if (!prediction_csv.empty()) {
        csv.open(prediction_csv);
        csv << "sample_id,true_class,predicted_class,fused_logits\n";
    }

    std::vector<int> order(test.size());
    for (size_t i = 0; i < test.size(); ++i) order[i] = static_cast<int>(i);
    int correct = 0;
    const size_t bs = 64;
    for (size_t from = 0; from < test.size(); from += bs) {
        const size_t to = std::min(test.size(), from + bs);
        Tensor x = batch_images(test, order, from, to, side, interp);
        const auto bundles = parallel ? predict_parallel(a, x, sessions_seen)
                                      : predict_standard(a, x, sessions_seen);
        for (size_t i = from; i < to; ++i) {
            const Sample& s = test[i];
            const PredictionBundle& b = bundles[i - from];
            if (b.predicted_class == s.label) ++correct;
            if (csv.is_open()) {
                csv << s.id << "," << s.label << "," << b.predicted_class << ",\"";
                for (size_t k = 0; k < b.fused.size(); ++k)
                    csv << (k ? " " : "") << b.fused[k];
                csv << "\"\n";
            }
        }
    }
    return static_cast<double>(correct) / static_cast<double>(test.size());
}

SessionResult run_session(Assembly& a, const TaskStream& stream, int j, const TrainConfig& cfg,
                          RegularizerState& reg, const TrainerHooks* hooks,
                          const RunArtifacts* artifacts) {
    const auto t_start = std::chrono::steady_clock::now();
    if (j < 1 || j > stream.num_sessions())
        throw OutOfOrderSession("session " + std::to_string(j));
    if (a.head.sessions_registered() != j - 1)
        throw OutOfOrderSession("session " + std::to_string(j) + " requested after " +
                                std::to_string(a.head.sessions_registered()));
    a.strategy.validate(stream.mode);
    a.head.mode = stream.mode;
    a.backbone.cfg.bn_policy = cfg.bn_policy;
    a.head.register_session(j, stream.sessions[static_cast<size_t>(j - 1)].class_ids);

    if (a.uses_transform()) {
        if (a.strategy.transform_mode == TransformMode::per_task)
            a.set_active_transform(a.ensure_task_transform(j));
        else
            a.apply_trainable_flags();
        if (a.strategy.transform.freeze_after_first_task && j >= 2)
            a.freeze_active_transform();
    } else {
        a.apply_trainable_flags();
    }

    const RegularizerKind rk = a.strategy.regularizer.kind;
    const RegularizerConfig& rc = a.strategy.regularizer;
    std::vector<nn::Param*> trainable = a.trainable_params();
    if (rk == RegularizerKind::ewc || rk == RegularizerKind::path_integral) {
        reg.ensure_layout(a);
        reg.session_start = nn::flatten_params(trainable);
    }
    if ((rk == RegularizerKind::lwf || rk == RegularizerKind::lwm) && j >= 2 &&
        !reg.has_teacher())
        throw NoTeacher("session " + std::to_string(j) + " needs the previous model");

    nn::Adam opt = make_optimizer(a, cfg);
    const std::vector<Sample>& train = stream.session_data(j).train;
    if (train.empty()) throw EmptyDataset("session " + std::to_string(j) + " has no train data");
    const int side = a.expected_input_side();
    const Interp interp = a.strategy.transform.interpolation;
    const std::vector<int> old_classes =
        j >= 2 ? a.head.classes_up_to(j - 1) : std::vector<int>{};

    SessionResult result;
    result.session_index = j;

    std::vector<int> order(train.size());
    for (size_t i = 0; i < train.size(); ++i) order[i] = static_cast<int>(i);

    for (int epoch = 0; epoch < cfg.effective_epochs(); ++epoch) {
        auto rng = make_rng(derive_seed(cfg.seed, "shuffle", static_cast<uint64_t>(j),
                                        static_cast<uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), rng);
        for (size_t from = 0; from < train.size(); from += static_cast<size_t>(cfg.batch_size)) {
            const size_t to = std::min(train.size(), from + static_cast<size_t>(cfg.batch_size));
            if (hooks && hooks->access_trace)
                for (size_t i = from; i < to; ++i)
                    hooks->access_trace->push_back(train[static_cast<size_t>(order[i])].id);

            Tensor x = batch_images(train, order, from, to, side, interp);
            std::vector<int> labels;
            for (size_t i = from; i < to; ++i) {
                const int global = train[static_cast<size_t>(order[i])].label;
                labels.push_back(stream.mode == StreamMode::class_incremental
                                     ? a.head.local_label(j, global)
                                     : global);
            }

            opt.zero_grad();
            Tensor feats = a.forward_features(x, /*training=*/true);
            Tensor full_logits = a.head.logits(feats);
            Tensor masked = a.head.masked_train_logits(full_logits, j);
            Tensor dmasked;
            const double ce = nn::softmax_cross_entropy(masked, labels, &dmasked);
            Tensor seed_full = stream.mode == StreamMode::class_incremental
                                   ? a.head.expand_slice_seed(dmasked, j)
                                   : dmasked;

            double reg_loss = 0.0;
            Tensor extra_act_grad;
            bool have_extra = false;

            if ((rk == RegularizerKind::lwf || rk == RegularizerKind::lwm) && j >= 2) {
                Assembly& teacher = *reg.teacher;
                Tensor t_logits_full = teacher.forward_logits(x, /*training=*/false);
                Tensor t_old = gather_columns(t_logits_full, old_classes);
                Tensor s_old = gather_columns(full_logits, old_classes);
                const double distill_w = rk == RegularizerKind::lwf ? rc.lwf_weight : rc.gamma;
                reg_loss += distill_w * lwf_penalty(s_old, t_old, rc.temperature);
                Tensor gs_old = lwf_penalty_backward(s_old, t_old, rc.temperature);
                for (int i = 0; i < gs_old.dim(0); ++i)
                    for (size_t r = 0; r < old_classes.size(); ++r)
                        seed_full.at2(i, old_classes[r]) +=
                            distill_w * gs_old.at2(i, static_cast<int>(r));

                if (rk == RegularizerKind::lwm && rc.beta != 0.0) {
                    // attention maps for the teacher's top old-class prediction
                    std::vector<int> att_classes;
                    for (int i = 0; i < t_old.dim(0); ++i) {
                        int best = 0;
                        for (size_t r = 1; r < old_classes.size(); ++r)
                            if (t_old.at2(i, static_cast<int>(r)) > t_old.at2(i, best))
                                best = static_cast<int>(r);
                        att_classes.push_back(old_classes[static_cast<size_t>(best)]);
                    }
                    GradcamResult smaps = gradcam_maps(a.cached_last_act, a.head.fc, att_classes);
                    GradcamResult tmaps =
                        gradcam_maps(teacher.cached_last_act, teacher.head.fc, att_classes);
                    reg_loss += rc.beta * attention_l1(smaps.maps, tmaps.maps);
                    Tensor gmaps = attention_l1_backward(smaps.maps, tmaps.maps);
                    for (double& v : gmaps.data) v *= rc.beta;
                    // label trick: attention classes are old classes, so their
                    // head rows take no weight gradient
                    extra_act_grad = gradcam_backward(smaps, gmaps, a.cached_last_act, a.head.fc,
                                                      /*accumulate_head_grads=*/false);
                    have_extra = true;
                }
            }

            Tensor gfeat = a.head.backward_label_trick(seed_full, j);
            a.backward_features(gfeat, have_extra ? &extra_act_grad : nullptr);

            std::vector<double> task_grads;
            if (rk == RegularizerKind::path_integral)
                task_grads = nn::flatten_grads(trainable);

            if ((rk == RegularizerKind::ewc || rk == RegularizerKind::path_integral) &&
                reg.has_anchor() && j >= 2) {
                const std::vector<double> theta = nn::flatten_params(trainable);
                reg_loss += quadratic_penalty(theta, reg.anchor, reg.omega, rc.lambda);
                std::vector<double> qgrad(theta.size(), 0.0);
                quadratic_penalty_grad(theta, reg.anchor, reg.omega, rc.lambda, qgrad);
                add_flat_to_grads(qgrad, trainable);
            }

            if (hooks && hooks->post_backward) {
                StepEvent ev;
                ev.session = j;
                ev.epoch = epoch;
                ev.step = result.steps;
                ev.loss_ce = ce;
                ev.loss_reg = reg_loss;
                ev.assembly = &a;
                hooks->post_backward(ev);
            }

            std::vector<double> theta_before;
            if (rk == RegularizerKind::path_integral)
                theta_before = nn::flatten_params(trainable);
            opt.step();
            if (rk == RegularizerKind::path_integral) {
                std::vector<double> delta = nn::flatten_params(trainable);
                for (size_t i = 0; i < delta.size(); ++i) delta[i] -= theta_before[i];
                pathint_accumulate(reg.path_accum, task_grads, delta);
            }

            log_step(artifacts ? artifacts->log : nullptr, j, epoch, result.steps, ce, reg_loss);
            ++result.steps;
        }
    }

    // session-end consolidation
    if (rk == RegularizerKind::ewc) {
        std::vector<int> subset;
        const int limit = std::min<int>(rc.fisher_max_samples, static_cast<int>(train.size()));
        auto rng = make_rng(derive_seed(cfg.seed, "fisher", static_cast<uint64_t>(j)));
        std::vector<int> all(train.size());
        for (size_t i = 0; i < train.size(); ++i) all[i] = static_cast<int>(i);
        std::shuffle(all.begin(), all.end(), rng);
        subset.assign(all.begin(), all.begin() + limit);
        const std::vector<int> active = stream.mode == StreamMode::class_incremental
                                            ? a.head.slice(j)
                                            : a.head.classes_up_to(j);
        AssemblyFisherAdapter adapter(a, train, subset, active, j, interp);
        const std::vector<double> fisher = fisher_diagonal(adapter);
        reg.omega = ewc_fuse(reg.omega, fisher, rc.alpha);
        reg.anchor = nn::flatten_params(trainable);
    } else if (rk == RegularizerKind::path_integral) {
        std::vector<double> total_delta = nn::flatten_params(trainable);
        for (size_t i = 0; i < total_delta.size(); ++i) total_delta[i] -= reg.session_start[i];
        pathint_consolidate(reg.omega, reg.path_accum, total_delta, rc.damping);
        reg.anchor = nn::flatten_params(trainable);
        std::fill(reg.path_accum.begin(), reg.path_accum.end(), 0.0);
    } else if (rk == RegularizerKind::lwf || rk == RegularizerKind::lwm) {
        reg.teacher = std::make_unique<Assembly>(a);
    }
    reg.kind = rk;

    // per-task transforms are pinned to their session
    if (a.uses_transform() && a.strategy.transform_mode == TransformMode::per_task)
        a.freeze_active_transform();

    for (int tau = 1; tau <= j; ++tau) {
        std::string csv;
        if (artifacts && !artifacts->dir.empty() && artifacts->export_predictions)
            csv = (fs::path(artifacts->dir) /
                   ("predictions_t" + std::to_string(j) + "_tau" + std::to_string(tau) + ".csv"))
                      .string();
        result.task_accuracies.push_back(evaluate_task(a, stream, tau, j, csv));
    }

    if (artifacts && !artifacts->dir.empty() && artifacts->save_checkpoints) {
        fs::create_directories(fs::path(artifacts->dir) / "checkpoints");
        const std::string base =
            (fs::path(artifacts->dir) / "checkpoints" / ("session_" + std::to_string(j)))
                .string();
        io::save_assembly(base + ".ckpt", a, {{"session", j}});
        if (rk == RegularizerKind::ewc || rk == RegularizerKind::path_integral)
            reg.save(base + ".reg");
    }

    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    if (cfg.verbose) {
        std::cout << "[session " << j << "] steps=" << result.steps << " acc:";
        for (double v : result.task_accuracies) std::cout << " " << v;
        std::cout << std::endl;
    }
    return result;
}

SequenceResult run_sequence(const Backbone& pretrained, const TaskStream& stream,
                            const TuningStrategy& strategy, const TrainConfig& cfg,
                            const RunArtifacts* artifacts, const TrainerHooks* hooks) {
    strategy.validate(stream.mode);
    Assembly a = Assembly::assemble(pretrained, stream.total_classes, strategy,
                                    derive_seed(cfg.seed, "assembly"));
    a.head.mode = stream.mode;
    a.backbone.cfg.bn_policy = cfg.bn_policy;

    RegularizerState reg;
    reg.kind = strategy.regularizer.kind;

    SequenceResult out;
    out.matrix = AccuracyMatrix::empty(stream.num_sessions());
    for (int j = 1; j <= stream.num_sessions(); ++j) {
        SessionResult r = run_session(a, stream, j, cfg, reg, hooks, artifacts);
        for (int tau = 1; tau <= j; ++tau)
            out.matrix.set(j, tau, r.task_accuracies[static_cast<size_t>(tau - 1)]);
        out.sessions.push_back(std::move(r));
    }

    if (artifacts && !artifacts->dir.empty()) {
        fs::create_directories(artifacts->dir);
        std::ofstream m(fs::path(artifacts->dir) / "matrix.csv");
        m << out.matrix.to_csv();
        const MetricsReport rep = metrics_report(out.matrix);
        std::ofstream r(fs::path(artifacts->dir) / "report.json");
        r << metrics_report_json(rep) << "\n";
        std::ofstream d(fs::path(artifacts->dir) / "stream.json");
        d << stream_descriptor_json(stream) << "\n";
    }
    return out;
}

double run_joint(const Backbone& pretrained, const TaskStream& stream,
                 const TuningStrategy& strategy, const TrainConfig& cfg) {
    const TaskStream merged = merge_stream_for_joint(stream);
    SequenceResult r = run_sequence(pretrained, merged, strategy, cfg);
    return r.matrix.a(1, 1);
}

} // namespace itcl
