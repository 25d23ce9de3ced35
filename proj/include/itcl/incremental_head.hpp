#pragma once

#include <vector>

#include "itcl/nn.hpp"

namespace itcl {

enum class StreamMode { class_incremental, domain_incremental };

// Incremental classification head ĉ: one linear projection over all classes
// the stream will ever contain, with a per-session slice registry for the
// class-incremental label trick. Logits are non-normalized everywhere.
struct IncrementalHead {
    nn::Linear fc;
    StreamMode mode = StreamMode::class_incremental;
    int total_classes = 0;
    std::vector<std::vector<int>> slices; // session j -> sorted global class ids

    IncrementalHead() : fc(1, 1) {}
    IncrementalHead(int feature_dim, int total, StreamMode m, uint64_t init_seed);

    int sessions_registered() const { return static_cast<int>(slices.size()); }
    void register_session(int j, std::vector<int> class_ids);
    const std::vector<int>& slice(int j) const; // throws UnregisteredSession
    // Global class ids seen up to session t, concatenated in session order
    // (each slice internally sorted). Matches the parallel-fusion layout.
    std::vector<int> classes_up_to(int t) const;
    // Slice-local index of a global label within session j.
    int local_label(int j, int global_label) const;

    // Full logits [N, total_classes]; caches features for the backward.
    Tensor logits(const Tensor& features) { return fc.forward(features); }

    // Label-trick training view. Class-incremental: the |slice(j)| columns of
    // session j; domain-incremental: all columns.
    Tensor masked_train_logits(const Tensor& full_logits, int j) const;

    // Backward from a full-width logit seed. Weight/bias gradients are
    // restricted to the rows of slice j in class-incremental mode (the label
    // trick); the feature gradient uses every row. Returns dL/dfeatures.
    Tensor backward_label_trick(const Tensor& gy_full, int j);

    // Scatter a slice-shaped seed into full width.
    Tensor expand_slice_seed(const Tensor& gy_slice, int j) const;

    void collect(nn::ParamRefs& out);
};

// Per-sample prediction produced by the standard or parallel path.
struct PredictionBundle {
    std::vector<std::vector<double>> per_task_logits; // y_j blocks
    std::vector<double> fused;                        // decision vector
    std::vector<int> fused_class_ids;                 // global id per entry
    int predicted_class = -1;                         // global id
};

// Fusion rules (kept as free functions so tests can drive them directly).
// Class-incremental: concatenate per-slice blocks in session order.
std::vector<double> fuse_concat(const std::vector<std::vector<double>>& blocks);
// Domain-incremental: elementwise max over the per-task logit vectors.
std::vector<double> fuse_max(const std::vector<std::vector<double>>& blocks);
// Argmax with ties broken toward the lowest class id.
int argmax_lowest(const std::vector<double>& fused, const std::vector<int>& class_ids);

} // namespace itcl
