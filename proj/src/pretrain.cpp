#include "itcl/pretrain.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>

#include "itcl/io/checkpoint.hpp"
#include "itcl/rng.hpp"
#include "itcl/task_stream.hpp"

namespace itcl {

Backbone pretrain_backbone_synthetic(const BackboneConfig& cfg, const PretrainSpec& spec) {
    Backbone b = Backbone::make(cfg, derive_seed(spec.seed, "pretrain-backbone"));
    const LabeledDataset source = make_synthetic_dataset(
        spec.classes, spec.samples_per_class, {cfg.in_channels, cfg.input_side, cfg.input_side},
        derive_seed(spec.seed, "pretrain-source"), /*domain_style=*/0, /*label_offset=*/0,
        spec.noise);

    nn::Linear head(b.feature_dim, spec.classes);
    {
        auto rng = make_rng(derive_seed(spec.seed, "pretrain-head"));
        head.init(rng);
    }

    // full supervised training of every parameter
    nn::ParamRefs refs;
    b.collect(refs);
    head.collect("head", refs);
    nn::Adam opt;
    for (auto& [name, p] : refs) {
        p->trainable = true;
        opt.add(p, spec.lr);
    }

    std::vector<int> order(source.samples.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

    for (int epoch = 0; epoch < spec.epochs; ++epoch) {
        auto rng = make_rng(derive_seed(spec.seed, "pretrain-shuffle",
                                        static_cast<uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        int batches = 0;
        for (size_t from = 0; from < order.size(); from += static_cast<size_t>(spec.batch_size)) {
            const size_t to = std::min(order.size(), from + static_cast<size_t>(spec.batch_size));
            const Sample& first = source.samples[static_cast<size_t>(order[from])];
            Tensor x({static_cast<int>(to - from), first.image.dim(0), first.image.dim(1),
                      first.image.dim(2)});
            std::vector<int> labels;
            for (size_t i = from; i < to; ++i) {
                const Sample& s = source.samples[static_cast<size_t>(order[i])];
                std::copy(s.image.data.begin(), s.image.data.end(),
                          x.data.begin() + static_cast<int64_t>(i - from) * s.image.numel());
                labels.push_back(s.label);
            }
            opt.zero_grad();
            Tensor cur = x;
            for (int u = 0; u < b.unit_count(); ++u) cur = b.run_unit(u, cur, /*training=*/true);
            Tensor feats = b.pool_features(cur);
            Tensor logits = head.forward(feats);
            Tensor dlogits;
            epoch_loss += nn::softmax_cross_entropy(logits, labels, &dlogits);
            ++batches;
            Tensor gfeat = head.backward(dlogits);
            Tensor g = b.backward_pool(gfeat);
            for (int u = b.unit_count() - 1; u >= 0; --u) g = b.backward_unit(u, g);
            opt.step();
        }
        if (spec.verbose)
            std::cout << "[pretrain] epoch " << epoch + 1 << "/" << spec.epochs
                      << " loss=" << epoch_loss / std::max(1, batches) << std::endl;
    }

    // the task head is discarded; only the feature extractor ships
    nn::ParamRefs bparams;
    b.collect(bparams);
    for (auto& [name, p] : bparams) p->trainable = false;
    b.pretrained_loaded = true;
    return b;
}

Backbone pretrained_backbone_cached(const BackboneConfig& cfg, const PretrainSpec& spec,
                                    const std::string& path) {
    namespace fs = std::filesystem;
    if (!path.empty() && fs::exists(path)) {
        Backbone b = io::load_backbone(path);
        if (b.cfg.variant == cfg.variant && b.cfg.input_side == cfg.input_side &&
            b.cfg.in_channels == cfg.in_channels)
            return b;
    }
    Backbone b = pretrain_backbone_synthetic(cfg, spec);
    if (!path.empty()) {
        fs::create_directories(fs::path(path).parent_path());
        io::save_backbone(path, b);
    }
    return b;
}

} // namespace itcl
