#pragma once

#include <string>
#include <vector>

#include "itcl/backbone.hpp"
#include "itcl/strategy.hpp"

namespace itcl {

// Backbone m + incremental head ĉ + optional transform g, with the tuning
// strategy deciding which parameter groups receive gradients.
struct Assembly {
    Backbone backbone;
    IncrementalHead head;
    TuningStrategy strategy;
    std::vector<TransformParams> transforms; // one (shared) or one per task
    int active_transform = -1;
    int latent_unit = -1; // resolved insertion unit for pad_latent
    uint64_t seed = 0;

    Tensor cached_last_act;    // pre-GAP activation of the last forward
    Tensor cached_features;    // pooled features of the last forward

    static Assembly assemble(Backbone bb, int total_classes, TuningStrategy s, uint64_t seed);

    bool uses_transform() const { return strategy.uses_transform(); }
    bool is_latent() const {
        return uses_transform() && strategy.transform.kind == TransformKind::pad_latent;
    }
    // Side the data pipeline must deliver: inner side for pad kinds,
    // the declared backbone side otherwise.
    int expected_input_side() const;

    int transform_count() const { return static_cast<int>(transforms.size()); }
    TransformParams& transform(int idx);
    const TransformParams& transform(int idx) const;
    // Allocates θ_{g_j} lazily in per-task mode; returns its index.
    int ensure_task_transform(int task_index);
    void set_active_transform(int idx);

    void apply_trainable_flags();
    void freeze_active_transform(); // IT-Pad-Fix after the first task

    std::vector<std::pair<std::string, nn::Param*>> named_params();
    nn::BufferRefs named_buffers();
    std::vector<nn::Param*> trainable_params();
    std::vector<std::pair<std::string, nn::Param*>> named_trainable_params();

    // Detached copy of a named group: all, theta_m, theta_m_prime,
    // theta_m_second, biases, theta_c, theta_g (ASCII aliases accepted).
    std::vector<double> snapshot_parameters(const std::string& group);
    std::vector<double> snapshot_bn_buffers();

    // --- forward/backward: one training pass in flight at a time
    Tensor forward_features(const Tensor& x, bool training);
    Tensor forward_logits(const Tensor& x, bool training);
    // Backward from dL/dfeatures; optionally injects an extra gradient on the
    // last block's activation (attention distillation).
    void backward_features(const Tensor& gfeat, const Tensor* extra_last_act_grad = nullptr);

    // Lowest backbone unit the backward pass must reach (-1: head only).
    int lowest_unit_needing_backward() const;
};

// Inference paths over trained sessions (task identity unknown at test time).
std::vector<PredictionBundle> predict_standard(Assembly& a, const Tensor& x_batch,
                                               int sessions_seen);
std::vector<PredictionBundle> predict_parallel(Assembly& a, const Tensor& x_batch,
                                               int sessions_seen);

} // namespace itcl
