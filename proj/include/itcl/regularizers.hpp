#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "itcl/assembly.hpp"

namespace itcl {

// ---------------------------------------------------------------------------
// penalty math (pure; unit-testable in isolation)
// ---------------------------------------------------------------------------

// KL(softmax(teacher/T) || softmax(student/T)), averaged over the batch.
// Both logit blocks must cover the same (old-class) units.
double lwf_penalty(const Tensor& student_logits, const Tensor& teacher_logits, double T);
Tensor lwf_penalty_backward(const Tensor& student_logits, const Tensor& teacher_logits,
                            double T);

// L1 distance between per-sample L2-normalized maps, averaged over the batch.
// Maps are [N, ...]; everything past the batch dimension is flattened.
double attention_l1(const Tensor& student_maps, const Tensor& teacher_maps);
Tensor attention_l1_backward(const Tensor& student_maps, const Tensor& teacher_maps);

// beta * attention term + gamma * LwF-style distillation term.
double lwm_penalty(const Tensor& student_maps, const Tensor& teacher_maps,
                   const Tensor& student_logits, const Tensor& teacher_logits,
                   double beta, double gamma, double T);

// lambda * sum_i omega_i (theta_i - anchor_i)^2
double quadratic_penalty(const std::vector<double>& theta, const std::vector<double>& anchor,
                         const std::vector<double>& omega, double lambda);
void quadratic_penalty_grad(const std::vector<double>& theta, const std::vector<double>& anchor,
                            const std::vector<double>& omega, double lambda,
                            std::vector<double>& grad_accum);

// Ω_new = alpha * Ω_old + (1 - alpha) * F
std::vector<double> ewc_fuse(const std::vector<double>& omega_old,
                             const std::vector<double>& fisher, double alpha);

// ω_i += -g_i * Δθ_i (every optimizer step)
void pathint_accumulate(std::vector<double>& path_accum, const std::vector<double>& grad,
                        const std::vector<double>& step_delta);
// Ω_i += max(0, ω_i / (Δ_i^2 + xi)); returns the clipped contribution.
std::vector<double> pathint_consolidate(std::vector<double>& omega,
                                        const std::vector<double>& path_accum,
                                        const std::vector<double>& total_delta, double xi);

// ---------------------------------------------------------------------------
// empirical Fisher
// ---------------------------------------------------------------------------

// Minimal view of a classifier for Fisher estimation. backward_logits must be
// called right after forward_logits for the same sample (the forward caches
// are reused across the per-class backward passes).
struct DifferentiableClassifier {
    virtual ~DifferentiableClassifier() = default;
    virtual int sample_count() const = 0;
    virtual int class_count() const = 0;
    virtual std::vector<double> forward_logits(int sample) = 0;
    virtual void backward_logits(int sample, const std::vector<double>& seed) = 0;
    virtual void zero_grads() = 0;
    virtual std::vector<double> grads() const = 0;
};

// Diagonal empirical Fisher of the per-sample log-likelihood, with the
// expectation taken over the model's own softmax (sampling-free):
//   F_i = mean_n sum_c p_c(x_n) (d log p_c(x_n) / d θ_i)^2
std::vector<double> fisher_diagonal(DifferentiableClassifier& model);

// ---------------------------------------------------------------------------
// gradient-weighted class-activation maps
// ---------------------------------------------------------------------------

// For a head that is linear on pooled features, the channel weights of a
// class-activation map are exactly the logit gradients W[c,:] / (H*W); the
// map is ReLU of the weighted channel sum and stays first-order
// differentiable in both the activations and the head weights.
struct GradcamResult {
    Tensor maps; // [N, H, W]
    Tensor pre;  // pre-ReLU values
    std::vector<int> classes;
};

GradcamResult gradcam_maps(const Tensor& last_act, const nn::Linear& fc,
                           const std::vector<int>& classes);
// Backward from d(loss)/d(maps): returns d(loss)/d(last_act); accumulates the
// head weight-row gradients unless suppressed (label trick).
Tensor gradcam_backward(const GradcamResult& res, const Tensor& gmaps, const Tensor& last_act,
                        nn::Linear& fc, bool accumulate_head_grads);

// ---------------------------------------------------------------------------
// cross-session state
// ---------------------------------------------------------------------------

struct RegularizerState {
    RegularizerKind kind = RegularizerKind::none;
    std::unique_ptr<Assembly> teacher; // lwf / lwm; frozen, never updated in-session
    std::vector<double> omega;         // Ω, aligned with the trainable set
    std::vector<double> anchor;        // θ*
    std::vector<double> path_accum;    // ω (within-session)
    std::vector<double> session_start; // θ at session start (total Δ)
    std::vector<std::pair<std::string, int64_t>> layout;

    bool has_teacher() const { return teacher != nullptr; }
    bool has_anchor() const { return !anchor.empty(); }
    // Build or verify the (name, numel) alignment against the trainable set.
    void ensure_layout(Assembly& a);
    void save(const std::string& path) const;
    static RegularizerState load(const std::string& path);
};

} // namespace itcl
