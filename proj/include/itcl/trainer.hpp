#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "itcl/metrics.hpp"
#include "itcl/regularizers.hpp"
#include "itcl/task_stream.hpp"

namespace itcl {

struct TrainConfig {
    int epochs_per_session = 20;
    bool online = false; // single pass over the session data
    int batch_size = 16;
    double lr_head = 1e-3;     // θ_ĉ and θ_g
    double lr_backbone = 1e-4; // backbone groups under bt/ft
    double weight_decay = 0.0;
    uint64_t seed = 0; // root seed; all stages derive sub-seeds from it
    nn::BnPolicy bn_policy = nn::BnPolicy::running;
    std::string device = "cpu";
    bool verbose = false;

    int effective_epochs() const { return online ? 1 : epochs_per_session; }
};

// Handed to the post-backward hook with gradients fully assembled, right
// before the optimizer update.
struct StepEvent {
    int session = 0, epoch = 0, step = 0;
    double loss_ce = 0.0, loss_reg = 0.0;
    Assembly* assembly = nullptr;
};

struct TrainerHooks {
    std::function<void(const StepEvent&)> post_backward;
    std::vector<int>* access_trace = nullptr; // training sample ids, in read order
};

struct SessionResult {
    int session_index = 0;
    std::vector<double> task_accuracies; // a_{j,tau} for tau = 1..j
    int steps = 0;
    double wall_seconds = 0.0;
};

struct RunArtifacts {
    std::string dir; // run directory; empty disables file output
    bool save_checkpoints = true;
    bool export_predictions = false;
    std::ostream* log = nullptr; // JSON-lines step log
};

struct SequenceResult {
    AccuracyMatrix matrix;
    std::vector<SessionResult> sessions;
};

// Trains session j (sessions 1..j-1 must be complete), fires the session-end
// regularizer hooks, evaluates a_{j,tau} for tau <= j and drops the session
// data reference. Optimizer state is rebuilt per session, so a run can resume
// bit-exactly from any session checkpoint.
SessionResult run_session(Assembly& a, const TaskStream& stream, int j, const TrainConfig& cfg,
                          RegularizerState& reg, const TrainerHooks* hooks = nullptr,
                          const RunArtifacts* artifacts = nullptr);

SequenceResult run_sequence(const Backbone& pretrained, const TaskStream& stream,
                            const TuningStrategy& strategy, const TrainConfig& cfg,
                            const RunArtifacts* artifacts = nullptr,
                            const TrainerHooks* hooks = nullptr);

// Joint-learning column: all session data merged into one supervised run.
double run_joint(const Backbone& pretrained, const TaskStream& stream,
                 const TuningStrategy& strategy, const TrainConfig& cfg);

// Accuracy on the test set of task tau with the current model, using the
// strategy's configured inference path; optionally exports per-sample rows
// (id, true class, predicted class, fused logits) as CSV.
double evaluate_task(Assembly& a, const TaskStream& stream, int tau, int sessions_seen,
                     const std::string& prediction_csv = "");

} // namespace itcl
