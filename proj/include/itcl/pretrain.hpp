#pragma once

#include <string>

#include "itcl/backbone.hpp"

namespace itcl {

// Desk-scale stand-in for large-scale pretraining: a short supervised run on
// a held-out synthetic source task. The resulting backbone (weights and batch
// norm statistics) is the frozen feature extractor for the CL experiments.
struct PretrainSpec {
    int classes = 6;
    int samples_per_class = 60;
    int epochs = 8;
    int batch_size = 16;
    double lr = 1e-3;
    uint64_t seed = 977;
    double noise = 0.3;
    bool verbose = false;
};

Backbone pretrain_backbone_synthetic(const BackboneConfig& cfg, const PretrainSpec& spec);

// Loads `path` if present, otherwise pretrains and caches there.
Backbone pretrained_backbone_cached(const BackboneConfig& cfg, const PretrainSpec& spec,
                                    const std::string& path);

} // namespace itcl
