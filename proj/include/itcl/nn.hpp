#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "itcl/kernels.hpp"
#include "itcl/tensor.hpp"

namespace itcl::nn {

// A learnable tensor plus its gradient accumulator. Layers skip gradient
// work for params with trainable == false; the strategy decides the flags.
struct Param {
    Tensor value;
    Tensor grad;
    bool trainable = false;

    Param() = default;
    explicit Param(std::vector<int> shape) : value(shape), grad(std::move(shape)) {}
    int64_t numel() const { return value.numel(); }
    void zero_grad() { grad.zero_(); }
};

using ParamRefs = std::vector<std::pair<std::string, Param*>>;
using BufferRefs = std::vector<std::pair<std::string, Tensor*>>;

enum class BnPolicy { running, frozen_pretrained };

struct RunMode {
    bool training = false;
    BnPolicy bn_policy = BnPolicy::running;
};

// ---------------------------------------------------------------------------
// layers (each caches what its backward needs; one forward in flight at a time)
// ---------------------------------------------------------------------------

struct Conv2d {
    int in_ch, out_ch, k, stride, pad;
    Param weight; // [out,in,k,k]; no bias, a batch norm always follows
    Tensor cached_x;

    Conv2d() : Conv2d(1, 1, 1, 1, 0) {}
    Conv2d(int in_c, int out_c, int kk, int s, int p);
    void init(std::mt19937_64& rng);
    int out_side(int side) const { return kernels::conv_out_side(side, k, stride, pad); }
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& gy);
    void collect(const std::string& prefix, ParamRefs& out);
};

struct BatchNorm2d {
    int ch;
    Param gamma, beta;
    Tensor running_mean, running_var;
    double momentum = 0.1;
    double eps = 1e-5;

    Tensor cached_xhat;
    std::vector<double> cached_invstd;
    bool cached_batch_stats = false;
    int cached_m = 0;

    BatchNorm2d() : BatchNorm2d(1) {}
    explicit BatchNorm2d(int channels);
    Tensor forward(const Tensor& x, const RunMode& m);
    Tensor backward(const Tensor& gy);
    void collect(const std::string& prefix, ParamRefs& out);
    void collect_buffers(const std::string& prefix, BufferRefs& out);
};

struct ReLU {
    std::vector<uint8_t> cached_mask;
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& gy) const;
};

struct MaxPool2d {
    int k, stride, pad;
    std::vector<int64_t> cached_argmax;
    std::vector<int> cached_in_shape;

    MaxPool2d(int kk, int s, int p) : k(kk), stride(s), pad(p) {}
    int out_side(int side) const { return kernels::conv_out_side(side, k, stride, pad); }
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& gy) const;
};

struct GlobalAvgPool {
    std::vector<int> cached_in_shape;
    Tensor forward(const Tensor& x); // [N,C,H,W] -> [N,C]
    Tensor backward(const Tensor& gy) const;
};

struct Linear {
    int in_dim, out_dim;
    Param weight; // [out,in]
    Param bias;   // [out]
    Tensor cached_x;

    Linear() : Linear(1, 1) {}
    Linear(int in_d, int out_d);
    void init(std::mt19937_64& rng); // uniform fan-in
    Tensor forward(const Tensor& x);
    // Weight/bias grads restricted to `rows` (all rows when empty); input grad
    // always uses the full weight matrix.
    Tensor backward(const Tensor& gy, const std::vector<int>& rows = {});
    void collect(const std::string& prefix, ParamRefs& out);
};

// conv-bn-relu-conv-bn (+ optional 1x1 downsample) -> add -> relu
struct BasicBlock {
    Conv2d conv1;
    BatchNorm2d bn1;
    ReLU relu1;
    Conv2d conv2;
    BatchNorm2d bn2;
    std::optional<Conv2d> ds_conv;
    std::optional<BatchNorm2d> ds_bn;
    ReLU relu_out;
    int stride;

    BasicBlock(int in_c, int out_c, int s);
    void init(std::mt19937_64& rng);
    int out_side(int side) const { return conv1.out_side(side); }
    Tensor forward(const Tensor& x, const RunMode& m);
    Tensor backward(const Tensor& gy);
    void collect(const std::string& prefix, ParamRefs& out);
    void collect_buffers(const std::string& prefix, BufferRefs& out);
    int64_t param_count() const;
};

// ---------------------------------------------------------------------------
// optimizer
// ---------------------------------------------------------------------------

struct Adam {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    double weight_decay = 0.0;
    int64_t t = 0;

    struct Entry {
        Param* p;
        double lr;
        std::vector<double> m, v;
    };
    std::vector<Entry> entries;

    void add(Param* p, double lr);
    void step();
    void zero_grad();
};

// ---------------------------------------------------------------------------
// small helpers shared by the model code
// ---------------------------------------------------------------------------

double kaiming_bound(int fan_in);
void fill_uniform(Tensor& t, double lo, double hi, std::mt19937_64& rng);

// Batch-mean softmax cross-entropy; writes d(loss)/d(logits) when dlogits
// is non-null. Labels index columns of `logits`.
double softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                             Tensor* dlogits);

std::vector<double> flatten_params(const std::vector<Param*>& ps);
void unflatten_params(const std::vector<double>& flat, const std::vector<Param*>& ps);
std::vector<double> flatten_grads(const std::vector<Param*>& ps);

} // namespace itcl::nn
