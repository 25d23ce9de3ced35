#include "itcl/backbone.hpp"

#include "itcl/rng.hpp"

namespace itcl {

namespace {

struct BlockSpec {
    int in_ch, out_ch, stride;
    std::string name;
};

std::vector<BlockSpec> block_plan(const BackboneConfig& cfg) {
    if (cfg.variant == "tiny") {
        const int c = cfg.in_channels;
        (void)c;
        return {{8, 8, 1, "block1"}, {8, 16, 2, "block2"},
                {16, 16, 1, "block3"}, {16, 32, 2, "block4"}};
    }
    if (cfg.variant == "resnet18") {
        std::vector<BlockSpec> plan;
        const int widths[4] = {64, 128, 256, 512};
        int in_c = 64;
        for (int layer = 0; layer < 4; ++layer) {
            for (int b = 0; b < 2; ++b) {
                const int s = (layer > 0 && b == 0) ? 2 : 1;
                plan.push_back({in_c, widths[layer], s,
                                "layer" + std::to_string(layer + 1) + "." + std::to_string(b)});
                in_c = widths[layer];
            }
        }
        return plan;
    }
    throw ConfigInvalid("unknown backbone variant '" + cfg.variant + "'");
}

} // namespace

Backbone Backbone::make(const BackboneConfig& cfg, uint64_t init_seed) {
    const bool deep = cfg.variant == "resnet18";
    const int stem_out = deep ? 64 : 8;
    Backbone b{cfg,
               0,
               false,
               nn::Conv2d(cfg.in_channels, stem_out, deep ? 7 : 3, deep ? 2 : 1, deep ? 3 : 1),
               nn::BatchNorm2d(stem_out),
               {},
               std::nullopt,
               {},
               {},
               {}};
    if (deep) b.stem_pool.emplace(3, 2, 1);
    for (const BlockSpec& s : block_plan(cfg)) {
        b.block_names.push_back(s.name);
        b.blocks.emplace_back(s.in_ch, s.out_ch, s.stride);
    }
    b.feature_dim = b.blocks.back().conv2.out_ch;
    if (b.cfg.last_block.empty())
        b.cfg.last_block = {b.block_names.back()};
    if (b.cfg.last_two_blocks.empty())
        b.cfg.last_two_blocks = {b.block_names[b.block_names.size() - 2], b.block_names.back()};

    auto rng = make_rng(derive_seed(init_seed, "backbone-init"));
    b.stem_conv.init(rng);
    for (auto& blk : b.blocks) blk.init(rng);
    return b;
}

int Backbone::unit_index(const std::string& name) const {
    if (name == "stem") return 0;
    for (size_t i = 0; i < block_names.size(); ++i)
        if (block_names[i] == name) return static_cast<int>(i) + 1;
    throw InsertionPointUnavailable("no unit named '" + name + "' in " + cfg.variant);
}

const std::string& Backbone::unit_name(int u) const {
    static const std::string stem = "stem";
    return u == 0 ? stem : block_names[static_cast<size_t>(u - 1)];
}

int Backbone::side_after_unit(int u, int input_side) const {
    int side = stem_conv.out_side(input_side);
    if (stem_pool) side = stem_pool->out_side(side);
    for (int i = 1; i <= u; ++i) side = blocks[static_cast<size_t>(i - 1)].out_side(side);
    return side;
}

int Backbone::channels_after_unit(int u) const {
    if (u == 0) return stem_conv.out_ch;
    return blocks[static_cast<size_t>(u - 1)].conv2.out_ch;
}

int Backbone::input_side_for_unit_side(int u, int target) const {
    for (int s = 1; s <= 4096; ++s)
        if (side_after_unit(u, s) == target) return s;
    throw InsertionPointUnavailable("no input side yields latent side " +
                                    std::to_string(target) + " after unit " + unit_name(u));
}

Tensor Backbone::run_unit(int u, const Tensor& x, bool training) {
    const nn::RunMode m{training, cfg.bn_policy};
    if (u == 0) {
        Tensor y = stem_relu.forward(stem_bn.forward(stem_conv.forward(x), m));
        if (stem_pool) y = stem_pool->forward(y);
        return y;
    }
    return blocks[static_cast<size_t>(u - 1)].forward(x, m);
}

Tensor Backbone::backward_unit(int u, const Tensor& gy) {
    if (u == 0) {
        Tensor g = gy;
        if (stem_pool) g = stem_pool->backward(g);
        return stem_conv.backward(stem_bn.backward(stem_relu.backward(g)));
    }
    return blocks[static_cast<size_t>(u - 1)].backward(gy);
}

void Backbone::collect(nn::ParamRefs& out) {
    stem_conv.collect("backbone.stem.conv", out);
    stem_bn.collect("backbone.stem.bn", out);
    for (size_t i = 0; i < blocks.size(); ++i)
        blocks[i].collect("backbone." + block_names[i], out);
}

void Backbone::collect_buffers(nn::BufferRefs& out) {
    stem_bn.collect_buffers("backbone.stem.bn", out);
    for (size_t i = 0; i < blocks.size(); ++i)
        blocks[i].collect_buffers("backbone." + block_names[i], out);
}

std::vector<int> Backbone::units_for_names(const std::vector<std::string>& names) const {
    std::vector<int> units;
    for (const std::string& n : names) {
        bool found = false;
        for (size_t i = 0; i < block_names.size(); ++i) {
            if (block_names[i] == n) {
                units.push_back(static_cast<int>(i) + 1);
                found = true;
                break;
            }
        }
        if (!found) throw UnknownBlockNames("selector '" + n + "' not in " + cfg.variant);
    }
    return units;
}

int64_t Backbone::param_count() const {
    int64_t n = stem_conv.weight.numel() + stem_bn.gamma.numel() + stem_bn.beta.numel();
    for (const auto& b : blocks) n += b.param_count();
    return n;
}

} // namespace itcl
