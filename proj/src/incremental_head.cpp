#include "itcl/incremental_head.hpp"

#include <algorithm>

#include "itcl/rng.hpp"

namespace itcl {

IncrementalHead::IncrementalHead(int feature_dim, int total, StreamMode m, uint64_t init_seed)
    : fc(feature_dim, total), mode(m), total_classes(total) {
    auto rng = make_rng(derive_seed(init_seed, "head-init"));
    fc.init(rng);
}

void IncrementalHead::register_session(int j, std::vector<int> class_ids) {
    if (j != sessions_registered() + 1)
        throw UnregisteredSession("sessions must be registered in order; got " +
                                  std::to_string(j) + " after " +
                                  std::to_string(sessions_registered()));
    std::sort(class_ids.begin(), class_ids.end());
    for (int c : class_ids)
        if (c < 0 || c >= total_classes)
            throw ShapeMismatch("class id " + std::to_string(c) + " outside head width");
    if (mode == StreamMode::class_incremental) {
        for (const auto& prev : slices)
            for (int c : class_ids)
                if (std::binary_search(prev.begin(), prev.end(), c))
                    throw LabelSpaceMismatch("class " + std::to_string(c) +
                                             " already owned by an earlier session");
    }
    slices.push_back(std::move(class_ids));
}

const std::vector<int>& IncrementalHead::slice(int j) const {
    if (j < 1 || j > sessions_registered())
        throw UnregisteredSession("session " + std::to_string(j));
    return slices[static_cast<size_t>(j - 1)];
}

std::vector<int> IncrementalHead::classes_up_to(int t) const {
    if (mode == StreamMode::domain_incremental) {
        std::vector<int> all(static_cast<size_t>(total_classes));
        for (int i = 0; i < total_classes; ++i) all[static_cast<size_t>(i)] = i;
        return all;
    }
    std::vector<int> out;
    for (int j = 1; j <= t; ++j) {
        const auto& s = slice(j);
        out.insert(out.end(), s.begin(), s.end());
    }
    return out;
}

int IncrementalHead::local_label(int j, int global_label) const {
    const auto& s = slice(j);
    const auto it = std::lower_bound(s.begin(), s.end(), global_label);
    if (it == s.end() || *it != global_label)
        throw LabelSpaceMismatch("label " + std::to_string(global_label) +
                                 " not in session " + std::to_string(j));
    return static_cast<int>(it - s.begin());
}

Tensor IncrementalHead::masked_train_logits(const Tensor& full_logits, int j) const {
    if (mode == StreamMode::domain_incremental) return full_logits;
    const auto& s = slice(j);
    const int n = full_logits.dim(0);
    Tensor out({n, static_cast<int>(s.size())});
    for (int i = 0; i < n; ++i)
        for (size_t r = 0; r < s.size(); ++r)
            out.at2(i, static_cast<int>(r)) = full_logits.at2(i, s[r]);
    return out;
}

Tensor IncrementalHead::expand_slice_seed(const Tensor& gy_slice, int j) const {
    const auto& s = slice(j);
    const int n = gy_slice.dim(0);
    Tensor full({n, total_classes});
    for (int i = 0; i < n; ++i)
        for (size_t r = 0; r < s.size(); ++r)
            full.at2(i, s[r]) = gy_slice.at2(i, static_cast<int>(r));
    return full;
}

Tensor IncrementalHead::backward_label_trick(const Tensor& gy_full, int j) {
    if (mode == StreamMode::domain_incremental) return fc.backward(gy_full);
    return fc.backward(gy_full, slice(j));
}

void IncrementalHead::collect(nn::ParamRefs& out) { fc.collect("head.fc", out); }

std::vector<double> fuse_concat(const std::vector<std::vector<double>>& blocks) {
    std::vector<double> out;
    for (const auto& b : blocks) out.insert(out.end(), b.begin(), b.end());
    return out;
}

std::vector<double> fuse_max(const std::vector<std::vector<double>>& blocks) {
    std::vector<double> out = blocks.at(0);
    for (size_t j = 1; j < blocks.size(); ++j) {
        if (blocks[j].size() != out.size())
            throw ShapeMismatch("max fusion over blocks of unequal width");
        for (size_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i], blocks[j][i]);
    }
    return out;
}

int argmax_lowest(const std::vector<double>& fused, const std::vector<int>& class_ids) {
    if (fused.empty() || fused.size() != class_ids.size())
        throw ShapeMismatch("fused vector / class id length mismatch");
    double best = fused[0];
    int best_id = class_ids[0];
    for (size_t i = 1; i < fused.size(); ++i) {
        if (fused[i] > best || (fused[i] == best && class_ids[i] < best_id)) {
            best = fused[i];
            best_id = class_ids[i];
        }
    }
    return best_id;
}

} // namespace itcl
