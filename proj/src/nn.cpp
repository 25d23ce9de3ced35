#include "itcl/nn.hpp"

#include <cmath>

namespace itcl::nn {

using kernels::default_exec;

double kaiming_bound(int fan_in) { return std::sqrt(1.0 / fan_in); }

void fill_uniform(Tensor& t, double lo, double hi, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> d(lo, hi);
    for (double& v : t.data) v = d(rng);
}

// ---------------------------------------------------------------------------
// Conv2d
// ---------------------------------------------------------------------------

Conv2d::Conv2d(int in_c, int out_c, int kk, int s, int p)
    : in_ch(in_c), out_ch(out_c), k(kk), stride(s), pad(p),
      weight({out_c, in_c, kk, kk}) {}

void Conv2d::init(std::mt19937_64& rng) {
    const double b = kaiming_bound(in_ch * k * k);
    fill_uniform(weight.value, -b, b, rng);
}

Tensor Conv2d::forward(const Tensor& x) {
    x.require_ndim(4, "conv2d input");
    if (x.dim(1) != in_ch) throw ShapeMismatch("conv2d: channel mismatch " + x.shape_str());
    cached_x = x;
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    Tensor y({n, out_ch, out_side(h), out_side(w)});
    kernels::conv2d_forward(x.ptr(), n, in_ch, h, w, weight.value.ptr(), out_ch, k,
                            stride, pad, y.ptr(), default_exec());
    return y;
}

Tensor Conv2d::backward(const Tensor& gy) {
    const int n = cached_x.dim(0), h = cached_x.dim(2), w = cached_x.dim(3);
    if (weight.trainable)
        kernels::conv2d_backward_weight(gy.ptr(), cached_x.ptr(), n, in_ch, h, w, out_ch,
                                        k, stride, pad, weight.grad.ptr(), default_exec());
    Tensor gx(cached_x.shape);
    kernels::conv2d_backward_input(gy.ptr(), n, in_ch, h, w, weight.value.ptr(), out_ch,
                                   k, stride, pad, gx.ptr(), default_exec());
    return gx;
}

void Conv2d::collect(const std::string& prefix, ParamRefs& out) {
    out.emplace_back(prefix + ".weight", &weight);
}

// ---------------------------------------------------------------------------
// BatchNorm2d
// ---------------------------------------------------------------------------

BatchNorm2d::BatchNorm2d(int channels)
    : ch(channels), gamma({channels}), beta({channels}),
      running_mean({channels}), running_var({channels}) {
    std::fill(gamma.value.data.begin(), gamma.value.data.end(), 1.0);
    std::fill(running_var.data.begin(), running_var.data.end(), 1.0);
}

Tensor BatchNorm2d::forward(const Tensor& x, const RunMode& m) {
    x.require_ndim(4, "batchnorm input");
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int hw = h * w;
    const int64_t mm = static_cast<int64_t>(n) * hw;
    cached_m = static_cast<int>(mm);
    cached_batch_stats = m.training && m.bn_policy == BnPolicy::running;
    cached_xhat = Tensor(x.shape);
    cached_invstd.assign(ch, 0.0);
    Tensor y(x.shape);

    const bool use_omp = default_exec() == kernels::Exec::openmp;
#pragma omp parallel for schedule(static) if (use_omp)
    for (int c = 0; c < ch; ++c) {
        double mean, var;
        if (cached_batch_stats) {
            double s = 0.0, s2 = 0.0;
            for (int in = 0; in < n; ++in) {
                const double* p = x.ptr() + (static_cast<int64_t>(in) * ch + c) * hw;
                for (int i = 0; i < hw; ++i) {
                    s += p[i];
                    s2 += p[i] * p[i];
                }
            }
            mean = s / mm;
            var = s2 / mm - mean * mean;
            if (var < 0.0) var = 0.0;
            running_mean.data[c] = (1.0 - momentum) * running_mean.data[c] + momentum * mean;
            // unbiased running variance, matching the usual convention
            const double unbiased = mm > 1 ? var * mm / (mm - 1.0) : var;
            running_var.data[c] = (1.0 - momentum) * running_var.data[c] + momentum * unbiased;
        } else {
            mean = running_mean.data[c];
            var = running_var.data[c];
        }
        const double invstd = 1.0 / std::sqrt(var + eps);
        cached_invstd[c] = invstd;
        const double g = gamma.value.data[c], b = beta.value.data[c];
        for (int in = 0; in < n; ++in) {
            const int64_t base = (static_cast<int64_t>(in) * ch + c) * hw;
            const double* p = x.ptr() + base;
            double* xh = cached_xhat.ptr() + base;
            double* yp = y.ptr() + base;
            for (int i = 0; i < hw; ++i) {
                xh[i] = (p[i] - mean) * invstd;
                yp[i] = g * xh[i] + b;
            }
        }
    }
    return y;
}

Tensor BatchNorm2d::backward(const Tensor& gy) {
    const int n = gy.dim(0), h = gy.dim(2), w = gy.dim(3);
    const int hw = h * w;
    Tensor gx(gy.shape);
    const bool use_omp = default_exec() == kernels::Exec::openmp;
#pragma omp parallel for schedule(static) if (use_omp)
    for (int c = 0; c < ch; ++c) {
        double sum_gy = 0.0, sum_gy_xhat = 0.0;
        for (int in = 0; in < n; ++in) {
            const int64_t base = (static_cast<int64_t>(in) * ch + c) * hw;
            const double* g = gy.ptr() + base;
            const double* xh = cached_xhat.ptr() + base;
            for (int i = 0; i < hw; ++i) {
                sum_gy += g[i];
                sum_gy_xhat += g[i] * xh[i];
            }
        }
        if (gamma.trainable) gamma.grad.data[c] += sum_gy_xhat;
        if (beta.trainable) beta.grad.data[c] += sum_gy;

        const double gval = gamma.value.data[c];
        const double invstd = cached_invstd[c];
        if (cached_batch_stats) {
            const double m = static_cast<double>(cached_m);
            for (int in = 0; in < n; ++in) {
                const int64_t base = (static_cast<int64_t>(in) * ch + c) * hw;
                const double* g = gy.ptr() + base;
                const double* xh = cached_xhat.ptr() + base;
                double* out = gx.ptr() + base;
                for (int i = 0; i < hw; ++i)
                    out[i] = gval * invstd / m * (m * g[i] - sum_gy - xh[i] * sum_gy_xhat);
            }
        } else {
            for (int in = 0; in < n; ++in) {
                const int64_t base = (static_cast<int64_t>(in) * ch + c) * hw;
                const double* g = gy.ptr() + base;
                double* out = gx.ptr() + base;
                for (int i = 0; i < hw; ++i) out[i] = gval * invstd * g[i];
            }
        }
    }
    return gx;
}

void BatchNorm2d::collect(const std::string& prefix, ParamRefs& out) {
    out.emplace_back(prefix + ".gamma", &gamma);
    out.emplace_back(prefix + ".beta", &beta);
}

void BatchNorm2d::collect_buffers(const std::string& prefix, BufferRefs& out) {
    out.emplace_back(prefix + ".running_mean", &running_mean);
    out.emplace_back(prefix + ".running_var", &running_var);
}

// ---------------------------------------------------------------------------
// ReLU / pooling
// ---------------------------------------------------------------------------

Tensor ReLU::forward(const Tensor& x) {
    cached_mask.assign(x.data.size(), 0);
    Tensor y(x.shape);
    for (size_t i = 0; i < x.data.size(); ++i) {
        if (x.data[i] > 0.0) {
            y.data[i] = x.data[i];
            cached_mask[i] = 1;
        }
    }
    return y;
}

Tensor ReLU::backward(const Tensor& gy) const {
    Tensor gx(gy.shape);
    for (size_t i = 0; i < gy.data.size(); ++i)
        gx.data[i] = cached_mask[i] ? gy.data[i] : 0.0;
    return gx;
}

Tensor MaxPool2d::forward(const Tensor& x) {
    x.require_ndim(4, "maxpool input");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int oh = out_side(h), ow = out_side(w);
    cached_in_shape = x.shape;
    Tensor y({n, c, oh, ow});
    cached_argmax.assign(y.data.size(), -1);
    const bool use_omp = default_exec() == kernels::Exec::openmp;
#pragma omp parallel for collapse(2) schedule(static) if (use_omp)
    for (int in = 0; in < n; ++in) {
        for (int ic = 0; ic < c; ++ic) {
            const double* xp = x.ptr() + (static_cast<int64_t>(in) * c + ic) * h * w;
            const int64_t ybase = (static_cast<int64_t>(in) * c + ic) * oh * ow;
            for (int i = 0; i < oh; ++i) {
                for (int j = 0; j < ow; ++j) {
                    double best = -1e300;
                    int64_t best_idx = -1;
                    for (int kh = 0; kh < k; ++kh) {
                        const int ih = i * stride - pad + kh;
                        if (ih < 0 || ih >= h) continue;
                        for (int kw = 0; kw < k; ++kw) {
                            const int iw = j * stride - pad + kw;
                            if (iw < 0 || iw >= w) continue;
                            const double v = xp[static_cast<int64_t>(ih) * w + iw];
                            if (v > best) {
                                best = v;
                                best_idx = static_cast<int64_t>(ih) * w + iw;
                            }
                        }
                    }
                    y.data[ybase + static_cast<int64_t>(i) * ow + j] = best;
                    cached_argmax[ybase + static_cast<int64_t>(i) * ow + j] =
                        (static_cast<int64_t>(in) * c + ic) * h * w + best_idx;
                }
            }
        }
    }
    return y;
}

Tensor MaxPool2d::backward(const Tensor& gy) const {
    Tensor gx(cached_in_shape);
    for (size_t i = 0; i < gy.data.size(); ++i)
        gx.data[static_cast<size_t>(cached_argmax[i])] += gy.data[i];
    return gx;
}

Tensor GlobalAvgPool::forward(const Tensor& x) {
    x.require_ndim(4, "gap input");
    cached_in_shape = x.shape;
    const int n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    Tensor y({n, c});
    for (int in = 0; in < n; ++in)
        for (int ic = 0; ic < c; ++ic) {
            const double* p = x.ptr() + (static_cast<int64_t>(in) * c + ic) * hw;
            double s = 0.0;
            for (int i = 0; i < hw; ++i) s += p[i];
            y.at2(in, ic) = s / hw;
        }
    return y;
}

Tensor GlobalAvgPool::backward(const Tensor& gy) const {
    Tensor gx(cached_in_shape);
    const int n = cached_in_shape[0], c = cached_in_shape[1];
    const int hw = cached_in_shape[2] * cached_in_shape[3];
    for (int in = 0; in < n; ++in)
        for (int ic = 0; ic < c; ++ic) {
            const double g = gy.at2(in, ic) / hw;
            double* p = gx.ptr() + (static_cast<int64_t>(in) * c + ic) * hw;
            for (int i = 0; i < hw; ++i) p[i] = g;
        }
    return gx;
}

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

Linear::Linear(int in_d, int out_d)
    : in_dim(in_d), out_dim(out_d), weight({out_d, in_d}), bias({out_d}) {}

void Linear::init(std::mt19937_64& rng) {
    const double b = kaiming_bound(in_dim);
    fill_uniform(weight.value, -b, b, rng);
    fill_uniform(bias.value, -b, b, rng);
}

Tensor Linear::forward(const Tensor& x) {
    x.require_ndim(2, "linear input");
    if (x.dim(1) != in_dim) throw ShapeMismatch("linear: feature dim " + x.shape_str());
    cached_x = x;
    Tensor y({x.dim(0), out_dim});
    kernels::linear_forward(x.ptr(), x.dim(0), in_dim, weight.value.ptr(),
                            bias.value.ptr(), out_dim, y.ptr(), default_exec());
    return y;
}

Tensor Linear::backward(const Tensor& gy, const std::vector<int>& rows) {
    const int n = cached_x.dim(0);
    if (weight.trainable || bias.trainable) {
        if (rows.empty()) {
            kernels::linear_backward_params(gy.ptr(), cached_x.ptr(), n, in_dim, out_dim,
                                            weight.trainable ? weight.grad.ptr() : nullptr,
                                            bias.trainable ? bias.grad.ptr() : nullptr,
                                            default_exec());
        } else {
            for (int r : rows) {
                double gb = 0.0;
                for (int i = 0; i < n; ++i) {
                    const double g = gy.at2(i, r);
                    gb += g;
                    if (weight.trainable) {
                        double* wr = weight.grad.ptr() + static_cast<int64_t>(r) * in_dim;
                        const double* xr = cached_x.ptr() + static_cast<int64_t>(i) * in_dim;
                        for (int t = 0; t < in_dim; ++t) wr[t] += g * xr[t];
                    }
                }
                if (bias.trainable) bias.grad.data[r] += gb;
            }
        }
    }
    Tensor gx({n, in_dim});
    kernels::linear_backward_input(gy.ptr(), weight.value.ptr(), n, in_dim, out_dim,
                                   gx.ptr(), default_exec());
    return gx;
}

void Linear::collect(const std::string& prefix, ParamRefs& out) {
    out.emplace_back(prefix + ".weight", &weight);
    out.emplace_back(prefix + ".bias", &bias);
}

// ---------------------------------------------------------------------------
// BasicBlock
// ---------------------------------------------------------------------------

BasicBlock::BasicBlock(int in_c, int out_c, int s)
    : conv1(in_c, out_c, 3, s, 1), bn1(out_c), conv2(out_c, out_c, 3, 1, 1), bn2(out_c),
      stride(s) {
    if (s != 1 || in_c != out_c) {
        ds_conv.emplace(in_c, out_c, 1, s, 0);
        ds_bn.emplace(out_c);
    }
}

void BasicBlock::init(std::mt19937_64& rng) {
    conv1.init(rng);
    conv2.init(rng);
    if (ds_conv) ds_conv->init(rng);
}

Tensor BasicBlock::forward(const Tensor& x, const RunMode& m) {
    Tensor out = relu1.forward(bn1.forward(conv1.forward(x), m));
    out = bn2.forward(conv2.forward(out), m);
    Tensor skip = ds_conv ? ds_bn->forward(ds_conv->forward(x), m) : x;
    if (!out.same_shape(skip)) throw ShapeMismatch("residual add " + out.shape_str());
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += skip.data[i];
    return relu_out.forward(out);
}

Tensor BasicBlock::backward(const Tensor& gy) {
    Tensor gs = relu_out.backward(gy);
    Tensor gmain = conv1.backward(bn1.backward(relu1.backward(conv2.backward(bn2.backward(gs)))));
    if (ds_conv) {
        Tensor gskip = ds_conv->backward(ds_bn->backward(gs));
        for (size_t i = 0; i < gmain.data.size(); ++i) gmain.data[i] += gskip.data[i];
    } else {
        for (size_t i = 0; i < gmain.data.size(); ++i) gmain.data[i] += gs.data[i];
    }
    return gmain;
}

void BasicBlock::collect(const std::string& prefix, ParamRefs& out) {
    conv1.collect(prefix + ".conv1", out);
    bn1.collect(prefix + ".bn1", out);
    conv2.collect(prefix + ".conv2", out);
    bn2.collect(prefix + ".bn2", out);
    if (ds_conv) {
        ds_conv->collect(prefix + ".downsample.conv", out);
        ds_bn->collect(prefix + ".downsample.bn", out);
    }
}

void BasicBlock::collect_buffers(const std::string& prefix, BufferRefs& out) {
    bn1.collect_buffers(prefix + ".bn1", out);
    bn2.collect_buffers(prefix + ".bn2", out);
    if (ds_bn) ds_bn->collect_buffers(prefix + ".downsample.bn", out);
}

int64_t BasicBlock::param_count() const {
    int64_t n = conv1.weight.numel() + conv2.weight.numel();
    n += bn1.gamma.numel() + bn1.beta.numel() + bn2.gamma.numel() + bn2.beta.numel();
    if (ds_conv) n += ds_conv->weight.numel() + ds_bn->gamma.numel() + ds_bn->beta.numel();
    return n;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

void Adam::add(Param* p, double lr) {
    entries.push_back({p, lr, std::vector<double>(p->numel(), 0.0),
                       std::vector<double>(p->numel(), 0.0)});
}

void Adam::step() {
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (Entry& e : entries) {
        double* v = e.p->value.data.data();
        double* g = e.p->grad.data.data();
        for (int64_t i = 0; i < e.p->numel(); ++i) {
            double gi = g[i];
            if (weight_decay != 0.0) gi += weight_decay * v[i];
            e.m[i] = beta1 * e.m[i] + (1.0 - beta1) * gi;
            e.v[i] = beta2 * e.v[i] + (1.0 - beta2) * gi * gi;
            const double mhat = e.m[i] / bc1;
            const double vhat = e.v[i] / bc2;
            v[i] -= e.lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

void Adam::zero_grad() {
    for (Entry& e : entries) e.p->zero_grad();
}

double softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                             Tensor* dlogits) {
    const int n = logits.dim(0), k = logits.dim(1);
    if (static_cast<int>(labels.size()) != n)
        throw ShapeMismatch("cross entropy: batch/label size mismatch");
    if (dlogits) *dlogits = Tensor(logits.shape);
    double loss = 0.0;
    std::vector<double> p(static_cast<size_t>(k));
    for (int i = 0; i < n; ++i) {
        const double* z = logits.ptr() + static_cast<int64_t>(i) * k;
        double mx = -1e300, sum = 0.0;
        for (int c = 0; c < k; ++c) mx = std::max(mx, z[c]);
        for (int c = 0; c < k; ++c) {
            p[static_cast<size_t>(c)] = std::exp(z[c] - mx);
            sum += p[static_cast<size_t>(c)];
        }
        const int y = labels[static_cast<size_t>(i)];
        if (y < 0 || y >= k) throw ShapeMismatch("cross entropy: label out of range");
        loss -= z[y] - mx - std::log(sum);
        if (dlogits) {
            for (int c = 0; c < k; ++c)
                dlogits->at2(i, c) = (p[static_cast<size_t>(c)] / sum - (c == y ? 1.0 : 0.0)) / n;
        }
    }
    return loss / n;
}

// ---------------------------------------------------------------------------
// flatten helpers
// ---------------------------------------------------------------------------

std::vector<double> flatten_params(const std::vector<Param*>& ps) {
    std::vector<double> out;
    for (const Param* p : ps) out.insert(out.end(), p->value.data.begin(), p->value.data.end());
    return out;
}

void unflatten_params(const std::vector<double>& flat, const std::vector<Param*>& ps) {
    size_t off = 0;
    for (Param* p : ps) {
        std::copy(flat.begin() + off, flat.begin() + off + p->value.data.size(),
                  p->value.data.begin());
        off += p->value.data.size();
    }
}

std::vector<double> flatten_grads(const std::vector<Param*>& ps) {
    std::vector<double> out;
    for (const Param* p : ps) out.insert(out.end(), p->grad.data.begin(), p->grad.data.end());
    return out;
}

} // namespace itcl::nn
