#include "itcl/assembly.hpp"

#include <algorithm>

#include "itcl/rng.hpp"

namespace itcl {

Assembly Assembly::assemble(Backbone bb, int total_classes, TuningStrategy s, uint64_t seed) {
    // stream-mode specific compatibility is re-checked by the trainer; the
    // structural checks here use the default mode
    s.validate(StreamMode::class_incremental);
    Assembly a;
    a.backbone = std::move(bb);
    a.strategy = s;
    a.seed = seed;
    // the trainer sets head.mode from the stream before the first session
    a.head = IncrementalHead(a.backbone.feature_dim, total_classes,
                             StreamMode::class_incremental, seed);

    // resolve θ'_m / θ''_m selectors early so bad names fail at assembly
    a.backbone.units_for_names(a.backbone.cfg.last_block);
    a.backbone.units_for_names(a.backbone.cfg.last_two_blocks);

    if (a.uses_transform()) {
        TransformConfig& t = a.strategy.transform;
        if (t.kind == TransformKind::pad_latent) {
            a.latent_unit = a.backbone.unit_index(t.insertion_point);
            if (a.latent_unit >= a.backbone.unit_count() - 1)
                throw InsertionPointUnavailable(
                    "latent insertion must precede the last block");
            const int native =
                a.backbone.side_after_unit(a.latent_unit, a.backbone.cfg.input_side);
            if (t.side == 0) t.side = native;
            t.channels = a.backbone.channels_after_unit(a.latent_unit);
            if (t.side - 2 * t.thickness <= 0)
                throw ShapeMismatch("latent frame thickness " + std::to_string(t.thickness) +
                                    " too large for latent side " + std::to_string(t.side));
        } else {
            t.side = a.backbone.cfg.input_side;
            t.channels = a.backbone.cfg.in_channels;
            if (t.kind == TransformKind::pad && t.side - 2 * t.thickness <= 0)
                throw ShapeMismatch("frame thickness too large for input side");
        }
        if (a.strategy.transform_mode == TransformMode::shared) {
            a.transforms.push_back(TransformParams::allocate(t, -1));
            a.active_transform = 0;
        }
        // per-task transforms are allocated lazily when each session starts
    }
    a.apply_trainable_flags();
    return a;
}

int Assembly::expected_input_side() const {
    if (!uses_transform()) return backbone.cfg.input_side;
    const TransformConfig& t = strategy.transform;
    switch (t.kind) {
        case TransformKind::add: return backbone.cfg.input_side;
        case TransformKind::pad: return t.side - 2 * t.thickness;
        case TransformKind::pad_latent:
            return backbone.input_side_for_unit_side(latent_unit, t.side - 2 * t.thickness);
    }
    return backbone.cfg.input_side;
}

TransformParams& Assembly::transform(int idx) {
    if (idx < 0 || idx >= transform_count())
        throw MissingTransform("transform index " + std::to_string(idx));
    return transforms[static_cast<size_t>(idx)];
}

const TransformParams& Assembly::transform(int idx) const {
    if (idx < 0 || idx >= transform_count())
        throw MissingTransform("transform index " + std::to_string(idx));
    return transforms[static_cast<size_t>(idx)];
}

int Assembly::ensure_task_transform(int task_index) {
    if (strategy.transform_mode != TransformMode::per_task)
        throw MissingTransform("per-task transform requested in shared mode");
    for (int i = 0; i < transform_count(); ++i)
        if (transforms[static_cast<size_t>(i)].owner_task == task_index) return i;
    transforms.push_back(TransformParams::allocate(strategy.transform, task_index));
    return transform_count() - 1;
}

void Assembly::set_active_transform(int idx) {
    transform(idx); // range check
    active_transform = idx;
    apply_trainable_flags();
}

void Assembly::apply_trainable_flags() {
    nn::ParamRefs all;
    backbone.collect(all);
    for (auto& [name, p] : all) p->trainable = false;
    head.fc.weight.trainable = true;
    head.fc.bias.trainable = true;
    for (auto& t : transforms) t.theta.trainable = false;

    auto enable_units = [&](const std::vector<std::string>& names) {
        backbone.units_for_names(names); // validate
        nn::ParamRefs refs;
        for (const std::string& n : names) {
            const int u = backbone.unit_index(n);
            backbone.blocks[static_cast<size_t>(u - 1)].collect("backbone." + n, refs);
        }
        for (auto& [name, p] : refs) p->trainable = true;
    };
    auto enable_biases = [&]() {
        for (auto& [name, p] : all)
            if (name.size() > 5 && name.compare(name.size() - 5, 5, ".beta") == 0)
                p->trainable = true;
    };

    switch (strategy.kind) {
        case StrategyKind::none: break;
        case StrategyKind::bias_tuning: enable_biases(); break;
        case StrategyKind::ft1: enable_units(backbone.cfg.last_block); break;
        case StrategyKind::ft2: enable_units(backbone.cfg.last_two_blocks); break;
        case StrategyKind::it_pad:
        case StrategyKind::it_add:
            if (active_transform >= 0) transforms[(size_t)active_transform].theta.trainable = true;
            break;
        case StrategyKind::it_pad_plus_bias:
            if (active_transform >= 0) transforms[(size_t)active_transform].theta.trainable = true;
            enable_biases();
            break;
    }
}

void Assembly::freeze_active_transform() {
    if (active_transform >= 0)
        transforms[static_cast<size_t>(active_transform)].theta.trainable = false;
}

std::vector<std::pair<std::string, nn::Param*>> Assembly::named_params() {
    nn::ParamRefs out;
    backbone.collect(out);
    head.collect(out);
    for (size_t i = 0; i < transforms.size(); ++i) {
        const auto& t = transforms[i];
        const std::string key = t.owner_task >= 0
                                    ? "transform.task" + std::to_string(t.owner_task)
                                    : "transform.shared";
        out.emplace_back(key + ".theta", &transforms[i].theta);
    }
    return out;
}

nn::BufferRefs Assembly::named_buffers() {
    nn::BufferRefs out;
    backbone.collect_buffers(out);
    return out;
}

std::vector<nn::Param*> Assembly::trainable_params() {
    std::vector<nn::Param*> out;
    for (auto& [name, p] : named_params())
        if (p->trainable) out.push_back(p);
    return out;
}

std::vector<std::pair<std::string, nn::Param*>> Assembly::named_trainable_params() {
    std::vector<std::pair<std::string, nn::Param*>> out;
    for (auto& [name, p] : named_params())
        if (p->trainable) out.emplace_back(name, p);
    return out;
}

std::vector<double> Assembly::snapshot_parameters(const std::string& group) {
    auto flatten = [](const nn::ParamRefs& refs) {
        std::vector<double> out;
        for (const auto& [name, p] : refs)
            out.insert(out.end(), p->value.data.begin(), p->value.data.end());
        return out;
    };
    nn::ParamRefs refs;
    if (group == "all") {
        for (auto& [name, p] : named_params()) refs.emplace_back(name, p);
        return flatten(refs);
    }
    if (group == "theta_m" || group == "backbone") {
        backbone.collect(refs);
        return flatten(refs);
    }
    if (group == "theta_m_prime" || group == "last_block") {
        for (const std::string& n : backbone.cfg.last_block)
            backbone.blocks[static_cast<size_t>(backbone.unit_index(n) - 1)].collect(
                "backbone." + n, refs);
        return flatten(refs);
    }
    if (group == "theta_m_second" || group == "last_two_blocks") {
        for (const std::string& n : backbone.cfg.last_two_blocks)
            backbone.blocks[static_cast<size_t>(backbone.unit_index(n) - 1)].collect(
                "backbone." + n, refs);
        return flatten(refs);
    }
    if (group == "biases") {
        nn::ParamRefs all;
        backbone.collect(all);
        for (auto& [name, p] : all)
            if (name.size() > 5 && name.compare(name.size() - 5, 5, ".beta") == 0)
                refs.emplace_back(name, p);
        return flatten(refs);
    }
    if (group == "theta_c" || group == "head") {
        head.collect(refs);
        return flatten(refs);
    }
    if (group == "theta_g" || group == "transform") {
        std::vector<double> out;
        for (const auto& t : transforms)
            out.insert(out.end(), t.theta.value.data.begin(), t.theta.value.data.end());
        return out;
    }
    throw UnknownGroup("'" + group + "'");
}

std::vector<double> Assembly::snapshot_bn_buffers() {
    std::vector<double> out;
    for (auto& [name, b] : named_buffers())
        out.insert(out.end(), b->data.begin(), b->data.end());
    return out;
}

Tensor Assembly::forward_features(const Tensor& x, bool training) {
    const int side = expected_input_side();
    if (x.ndim() != 4 || x.dim(1) != backbone.cfg.in_channels || x.dim(2) != side ||
        x.dim(3) != side)
        throw ShapeMismatch("expected batch x " + std::to_string(backbone.cfg.in_channels) +
                            "x" + std::to_string(side) + "x" + std::to_string(side) +
                            ", got " + x.shape_str());
    Tensor cur = x;
    const TransformConfig& t = strategy.transform;
    if (uses_transform()) {
        if (active_transform < 0) throw MissingTransform("no active transform set");
        const TransformParams& tp = transform(active_transform);
        if (t.kind == TransformKind::add) cur = apply_add(cur, tp.theta.value);
        if (t.kind == TransformKind::pad) cur = apply_pad(cur, tp.theta.value, t.side, t.thickness);
    }
    const int units = backbone.unit_count();
    for (int u = 0; u < units; ++u) {
        cur = backbone.run_unit(u, cur, training);
        if (is_latent() && u == latent_unit) {
            const TransformParams& tp = transform(active_transform);
            cur = apply_pad(cur, tp.theta.value, t.side, t.thickness);
        }
    }
    cached_last_act = cur;
    cached_features = backbone.pool_features(cur);
    return cached_features;
}

Tensor Assembly::forward_logits(const Tensor& x, bool training) {
    return head.logits(forward_features(x, training));
}

int Assembly::lowest_unit_needing_backward() const {
    int lowest = backbone.unit_count(); // nothing yet
    // backbone params
    nn::ParamRefs refs;
    Backbone& bb = const_cast<Backbone&>(backbone);
    for (int u = 0; u < backbone.unit_count(); ++u) {
        refs.clear();
        if (u == 0) {
            bb.stem_conv.collect("s", refs);
            bb.stem_bn.collect("s", refs);
        } else {
            bb.blocks[static_cast<size_t>(u - 1)].collect("b", refs);
        }
        for (auto& [name, p] : refs)
            if (p->trainable) {
                lowest = std::min(lowest, u);
                break;
            }
    }
    if (uses_transform() && active_transform >= 0 &&
        transforms[static_cast<size_t>(active_transform)].theta.trainable) {
        if (is_latent())
            lowest = std::min(lowest, latent_unit + 1);
        else
            lowest = std::min(lowest, 0);
    }
    return lowest == backbone.unit_count() ? -1 : lowest;
}

void Assembly::backward_features(const Tensor& gfeat, const Tensor* extra_last_act_grad) {
    const int stop = lowest_unit_needing_backward();
    const bool input_transform_grad =
        uses_transform() && !is_latent() && active_transform >= 0 &&
        transforms[static_cast<size_t>(active_transform)].theta.trainable;
    if (stop < 0 && !input_transform_grad) return;

    Tensor g = backbone.backward_pool(gfeat);
    if (extra_last_act_grad) {
        if (!g.same_shape(*extra_last_act_grad))
            throw ShapeMismatch("extra last-act gradient shape");
        for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += extra_last_act_grad->data[i];
    }

    const TransformConfig& t = strategy.transform;
    const int first = stop < 0 ? 0 : stop;
    for (int u = backbone.unit_count() - 1; u >= first; --u) {
        g = backbone.backward_unit(u, g);
        if (is_latent() && u == latent_unit + 1) {
            // crossing the insertion point: g is the gradient at the padded map
            TransformParams& tp = transform(active_transform);
            const bool below = first <= latent_unit;
            Tensor gx;
            pad_backward(g, t.side, t.thickness, below ? &gx : nullptr,
                         tp.theta.trainable ? &tp.theta.grad : nullptr);
            if (!below) return;
            g = gx;
        }
    }
    if (input_transform_grad) {
        TransformParams& tp = transform(active_transform);
        if (t.kind == TransformKind::add)
            add_backward(g, nullptr, &tp.theta.grad);
        else
            pad_backward(g, t.side, t.thickness, nullptr, &tp.theta.grad);
    }
}

// ---------------------------------------------------------------------------
// inference paths
// ---------------------------------------------------------------------------

namespace {

std::vector<double> row_of(const Tensor& logits, int row, const std::vector<int>& cols) {
    std::vector<double> out(cols.size());
    for (size_t i = 0; i < cols.size(); ++i) out[i] = logits.at2(row, cols[i]);
    return out;
}

std::vector<int> iota_ids(int n) {
    std::vector<int> ids(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) ids[static_cast<size_t>(i)] = i;
    return ids;
}

} // namespace

std::vector<PredictionBundle> predict_standard(Assembly& a, const Tensor& x_batch,
                                               int sessions_seen) {
    if (sessions_seen < 1) throw NoTrainedSessions("no sessions trained yet");
    Tensor logits = a.forward_logits(x_batch, /*training=*/false);
    const int n = logits.dim(0);
    std::vector<PredictionBundle> out(static_cast<size_t>(n));
    if (a.head.mode == StreamMode::class_incremental) {
        for (int i = 0; i < n; ++i) {
            PredictionBundle& b = out[static_cast<size_t>(i)];
            for (int j = 1; j <= sessions_seen; ++j)
                b.per_task_logits.push_back(row_of(logits, i, a.head.slice(j)));
            b.fused = fuse_concat(b.per_task_logits);
            b.fused_class_ids = a.head.classes_up_to(sessions_seen);
            b.predicted_class = argmax_lowest(b.fused, b.fused_class_ids);
        }
    } else {
        const std::vector<int> ids = iota_ids(a.head.total_classes);
        for (int i = 0; i < n; ++i) {
            PredictionBundle& b = out[static_cast<size_t>(i)];
            b.per_task_logits.push_back(row_of(logits, i, ids));
            b.fused = b.per_task_logits[0];
            b.fused_class_ids = ids;
            b.predicted_class = argmax_lowest(b.fused, b.fused_class_ids);
        }
    }
    return out;
}

std::vector<PredictionBundle> predict_parallel(Assembly& a, const Tensor& x_batch,
                                               int sessions_seen) {
    if (sessions_seen < 1) throw NoTrainedSessions("no sessions trained yet");
    if (a.strategy.transform_mode != TransformMode::per_task)
        return predict_standard(a, x_batch, sessions_seen);
    const int n = x_batch.dim(0);
    std::vector<PredictionBundle> out(static_cast<size_t>(n));

    const int saved_active = a.active_transform;
    std::vector<Tensor> branch_logits;
    for (int j = 1; j <= sessions_seen; ++j) {
        int idx = -1;
        for (int i = 0; i < a.transform_count(); ++i)
            if (a.transforms[static_cast<size_t>(i)].owner_task == j) idx = i;
        if (idx < 0)
            throw MissingTransform("no trained transform for task " + std::to_string(j));
        a.active_transform = idx; // avoid re-flagging trainables during inference
        branch_logits.push_back(a.forward_logits(x_batch, /*training=*/false));
    }
    a.active_transform = saved_active;

    if (a.head.mode == StreamMode::class_incremental) {
        for (int i = 0; i < n; ++i) {
            PredictionBundle& b = out[static_cast<size_t>(i)];
            for (int j = 1; j <= sessions_seen; ++j)
                b.per_task_logits.push_back(
                    row_of(branch_logits[static_cast<size_t>(j - 1)], i, a.head.slice(j)));
            b.fused = fuse_concat(b.per_task_logits);
            b.fused_class_ids = a.head.classes_up_to(sessions_seen);
            b.predicted_class = argmax_lowest(b.fused, b.fused_class_ids);
        }
    } else {
        const std::vector<int> ids = iota_ids(a.head.total_classes);
        for (int i = 0; i < n; ++i) {
            PredictionBundle& b = out[static_cast<size_t>(i)];
            for (int j = 1; j <= sessions_seen; ++j)
                b.per_task_logits.push_back(
                    row_of(branch_logits[static_cast<size_t>(j - 1)], i, ids));
            b.fused = fuse_max(b.per_task_logits);
            b.fused_class_ids = ids;
            b.predicted_class = argmax_lowest(b.fused, b.fused_class_ids);
        }
    }
    return out;
}

} // namespace itcl
