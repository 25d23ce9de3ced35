#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "itcl/nn.hpp"

using namespace itcl;
using testutil::fd_gradient;
using testutil::max_rel_error;
using testutil::random_tensor;

namespace {

// scalar loss = sum(weights ⊙ output); its gradient seeds the backward pass
double weighted_sum(const Tensor& y, const Tensor& w) {
    double s = 0;
    for (size_t i = 0; i < y.data.size(); ++i) s += y.data[i] * w.data[i];
    return s;
}

} // namespace

TEST_CASE("conv2d analytic gradients match finite differences") {
    std::mt19937_64 rng(5);
    nn::Conv2d conv(3, 4, 3, 2, 1);
    conv.init(rng);
    conv.weight.trainable = true;
    auto x = random_tensor({2, 3, 8, 8}, rng);
    const int oh = conv.out_side(8);
    auto lw = random_tensor({2, 4, oh, oh}, rng);

    auto loss = [&]() { return weighted_sum(conv.forward(x), lw); };
    loss(); // populate caches
    conv.weight.zero_grad();
    Tensor gx = conv.backward(lw);

    auto fd_w = fd_gradient(loss, conv.weight.value.data);
    CHECK(max_rel_error(conv.weight.grad.data, fd_w) < 1e-6);
    auto fd_x = fd_gradient(loss, x.data);
    CHECK(max_rel_error(gx.data, fd_x) < 1e-6);
}

TEST_CASE("batchnorm gradients: batch-stats mode and frozen-stats mode") {
    std::mt19937_64 rng(6);
    for (const bool frozen : {false, true}) {
        nn::BatchNorm2d bn(3);
        auto grng = std::mt19937_64(99);
        nn::fill_uniform(bn.gamma.value, 0.5, 1.5, grng);
        nn::fill_uniform(bn.beta.value, -0.5, 0.5, grng);
        nn::fill_uniform(bn.running_mean, -0.3, 0.3, grng);
        nn::fill_uniform(bn.running_var, 0.5, 1.5, grng);
        bn.gamma.trainable = bn.beta.trainable = true;

        const nn::RunMode mode{true, frozen ? nn::BnPolicy::frozen_pretrained
                                            : nn::BnPolicy::running};
        auto x = random_tensor({3, 3, 4, 4}, rng);
        auto lw = random_tensor({3, 3, 4, 4}, rng);

        // running statistics mutate in running mode, so freeze a copy for FD
        auto loss = [&]() {
            nn::BatchNorm2d tmp = bn;
            return weighted_sum(tmp.forward(x, mode), lw);
        };
        nn::BatchNorm2d work = bn;
        work.forward(x, mode);
        work.gamma.zero_grad();
        work.beta.zero_grad();
        Tensor gx = work.backward(lw);

        auto fd_x = fd_gradient(loss, x.data);
        CHECK(max_rel_error(gx.data, fd_x) < 1e-5);
        auto fd_g = fd_gradient(loss, bn.gamma.value.data);
        CHECK(max_rel_error(work.gamma.grad.data, fd_g) < 1e-5);
        auto fd_b = fd_gradient(loss, bn.beta.value.data);
        CHECK(max_rel_error(work.beta.grad.data, fd_b) < 1e-5);
    }
}

TEST_CASE("basic block end-to-end gradient check") {
    std::mt19937_64 rng(7);
    nn::BasicBlock block(3, 5, 2);
    block.init(rng);
    nn::ParamRefs refs;
    block.collect("block", refs);
    for (auto& [name, p] : refs) p->trainable = true;

    auto x = random_tensor({2, 3, 6, 6}, rng, 0.7);
    const nn::RunMode mode{true, nn::BnPolicy::running};
    Tensor probe = block.forward(x, mode);
    auto lw = random_tensor(probe.shape, rng);

    auto loss = [&]() {
        nn::BasicBlock tmp = block;
        return weighted_sum(tmp.forward(x, mode), lw);
    };
    nn::BasicBlock work = block;
    work.forward(x, mode);
    Tensor gx = work.backward(lw);
    auto fd_x = fd_gradient(loss, x.data);
    CHECK(max_rel_error(gx.data, fd_x, 1e-5) < 2e-4);

    nn::ParamRefs work_refs;
    work.collect("block", work_refs);
    for (size_t i = 0; i < refs.size(); ++i) {
        auto fd = fd_gradient(loss, refs[i].second->value.data);
        CHECK(max_rel_error(work_refs[i].second->grad.data, fd, 1e-5) < 2e-4);
    }
}

TEST_CASE("relu, maxpool and gap backward") {
    std::mt19937_64 rng(8);
    auto x = random_tensor({2, 2, 6, 6}, rng);

    nn::ReLU relu;
    auto lw1 = random_tensor({2, 2, 6, 6}, rng);
    auto loss1 = [&]() {
        nn::ReLU tmp;
        return weighted_sum(tmp.forward(x), lw1);
    };
    relu.forward(x);
    CHECK(max_rel_error(relu.backward(lw1).data, fd_gradient(loss1, x.data)) < 1e-6);

    nn::MaxPool2d pool(3, 2, 1);
    auto y = pool.forward(x);
    auto lw2 = random_tensor(y.shape, rng);
    auto loss2 = [&]() {
        nn::MaxPool2d tmp(3, 2, 1);
        return weighted_sum(tmp.forward(x), lw2);
    };
    CHECK(max_rel_error(pool.backward(lw2).data, fd_gradient(loss2, x.data)) < 1e-6);

    nn::GlobalAvgPool gap;
    auto f = gap.forward(x);
    auto lw3 = random_tensor(f.shape, rng);
    auto loss3 = [&]() {
        nn::GlobalAvgPool tmp;
        return weighted_sum(tmp.forward(x), lw3);
    };
    CHECK(max_rel_error(gap.backward(lw3).data, fd_gradient(loss3, x.data)) < 1e-6);
}

TEST_CASE("softmax cross entropy value and gradient") {
    std::mt19937_64 rng(9);
    auto z = random_tensor({4, 5}, rng);
    std::vector<int> labels = {1, 0, 4, 2};
    Tensor dz;
    const double loss = nn::softmax_cross_entropy(z, labels, &dz);
    CHECK(loss > 0.0);
    auto f = [&]() { return nn::softmax_cross_entropy(z, labels, nullptr); };
    CHECK(max_rel_error(dz.data, fd_gradient(f, z.data)) < 1e-6);
}

TEST_CASE("adam with zero learning rate leaves parameters untouched") {
    nn::Param p({4});
    p.value.data = {1, 2, 3, 4};
    p.grad.data = {1, 1, 1, 1};
    p.trainable = true;
    nn::Adam opt;
    opt.add(&p, 0.0);
    opt.step();
    CHECK(p.value.data == std::vector<double>{1, 2, 3, 4});
}
