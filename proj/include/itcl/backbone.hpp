#pragma once

#include <optional>
#include <string>
#include <vector>

#include "itcl/nn.hpp"

namespace itcl {

// Which backbone to build. "tiny" is a 4-block residual net for desk-scale
// experiments; "resnet18" matches the standard 18-layer configuration
// (7x7 stem + maxpool + 8 basic blocks).
struct BackboneConfig {
    std::string variant = "tiny";
    int input_side = 24;
    int in_channels = 3;
    nn::BnPolicy bn_policy = nn::BnPolicy::running;
    // Optional overrides for the last-block / last-two-blocks selectors.
    std::vector<std::string> last_block;
    std::vector<std::string> last_two_blocks;
};

// Feature extractor m: stem + residual blocks + global average pooling.
// Unit 0 is the stem; units 1..B are the blocks, addressable by name.
struct Backbone {
    BackboneConfig cfg;
    int feature_dim = 0;
    bool pretrained_loaded = false;

    nn::Conv2d stem_conv;
    nn::BatchNorm2d stem_bn;
    nn::ReLU stem_relu;
    std::optional<nn::MaxPool2d> stem_pool;
    std::vector<std::string> block_names;
    std::vector<nn::BasicBlock> blocks;
    nn::GlobalAvgPool gap;

    static Backbone make(const BackboneConfig& cfg, uint64_t init_seed);

    int unit_count() const { return 1 + static_cast<int>(blocks.size()); }
    // Resolves "stem" or a block name; throws InsertionPointUnavailable.
    int unit_index(const std::string& name) const;
    const std::string& unit_name(int u) const;
    // Spatial side of the activation after unit u given an input side.
    int side_after_unit(int u, int input_side) const;
    int channels_after_unit(int u) const;
    // Smallest input side whose activation after unit u has side `target`.
    int input_side_for_unit_side(int u, int target) const;

    Tensor run_unit(int u, const Tensor& x, bool training);
    Tensor backward_unit(int u, const Tensor& gy);
    Tensor pool_features(const Tensor& x) { return gap.forward(x); }
    Tensor backward_pool(const Tensor& gfeat) const { return gap.backward(gfeat); }

    void collect(nn::ParamRefs& out);            // names prefixed "backbone."
    void collect_buffers(nn::BufferRefs& out);
    // Units selected by θ'_m / θ''_m; throws UnknownBlockNames on bad selectors.
    std::vector<int> units_for_names(const std::vector<std::string>& names) const;
    int64_t param_count() const;
};

} // namespace itcl
