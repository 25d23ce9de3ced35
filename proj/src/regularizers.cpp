#include "itcl/regularizers.hpp"

#include <cmath>

#include "itcl/io/checkpoint.hpp"

namespace itcl {

namespace {

// row-wise softmax of logits/T
std::vector<double> softmax_row(const double* z, int k, double T) {
    std::vector<double> p(static_cast<size_t>(k));
    double mx = -1e300;
    for (int i = 0; i < k; ++i) mx = std::max(mx, z[i] / T);
    double sum = 0.0;
    for (int i = 0; i < k; ++i) {
        p[static_cast<size_t>(i)] = std::exp(z[i] / T - mx);
        sum += p[static_cast<size_t>(i)];
    }
    for (double& v : p) v /= sum;
    return p;
}

constexpr double kNormFloor = 1e-12;

} // namespace

double lwf_penalty(const Tensor& student_logits, const Tensor& teacher_logits, double T) {
    if (!student_logits.same_shape(teacher_logits))
        throw ShapeMismatch("lwf: student/teacher logit blocks differ");
    const int n = student_logits.dim(0), k = student_logits.dim(1);
    if (n == 0) throw NoTeacher("lwf penalty on an empty batch");
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto ps = softmax_row(student_logits.ptr() + static_cast<int64_t>(i) * k, k, T);
        const auto pt = softmax_row(teacher_logits.ptr() + static_cast<int64_t>(i) * k, k, T);
        for (int c = 0; c < k; ++c)
            total += pt[static_cast<size_t>(c)] *
                     (std::log(pt[static_cast<size_t>(c)] + 1e-300) -
                      std::log(ps[static_cast<size_t>(c)] + 1e-300));
    }
    return total / n;
}

Tensor lwf_penalty_backward(const Tensor& student_logits, const Tensor& teacher_logits,
                            double T) {
    const int n = student_logits.dim(0), k = student_logits.dim(1);
    Tensor g(student_logits.shape);
    for (int i = 0; i < n; ++i) {
        const auto ps = softmax_row(student_logits.ptr() + static_cast<int64_t>(i) * k, k, T);
        const auto pt = softmax_row(teacher_logits.ptr() + static_cast<int64_t>(i) * k, k, T);
        for (int c = 0; c < k; ++c)
            g.at2(i, c) = (ps[static_cast<size_t>(c)] - pt[static_cast<size_t>(c)]) / (T * n);
    }
    return g;
}

double attention_l1(const Tensor& student_maps, const Tensor& teacher_maps) {
    if (!student_maps.same_shape(teacher_maps))
        throw ShapeMismatch("attention maps differ in shape");
    const int n = student_maps.dim(0);
    const int64_t m = student_maps.numel() / n;
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const double* s = student_maps.ptr() + i * m;
        const double* t = teacher_maps.ptr() + i * m;
        double ns = 0.0, nt = 0.0;
        for (int64_t j = 0; j < m; ++j) {
            ns += s[j] * s[j];
            nt += t[j] * t[j];
        }
        ns = std::max(std::sqrt(ns), kNormFloor);
        nt = std::max(std::sqrt(nt), kNormFloor);
        for (int64_t j = 0; j < m; ++j) total += std::abs(s[j] / ns - t[j] / nt);
    }
    return total / n;
}

Tensor attention_l1_backward(const Tensor& student_maps, const Tensor& teacher_maps) {
    const int n = student_maps.dim(0);
    const int64_t m = student_maps.numel() / n;
    Tensor g(student_maps.shape);
    for (int i = 0; i < n; ++i) {
        const double* s = student_maps.ptr() + i * m;
        const double* t = teacher_maps.ptr() + i * m;
        double ns = 0.0, nt = 0.0;
        for (int64_t j = 0; j < m; ++j) {
            ns += s[j] * s[j];
            nt += t[j] * t[j];
        }
        const double rs = std::max(std::sqrt(ns), kNormFloor);
        const double rt = std::max(std::sqrt(nt), kNormFloor);
        // d/ds of |s/rs - t/rt| with u = s/rs: (w - u (w.u)) / rs, w = sign(u - v)
        double wu = 0.0;
        for (int64_t j = 0; j < m; ++j) {
            const double u = s[j] / rs, v = t[j] / rt;
            const double w = u > v ? 1.0 : (u < v ? -1.0 : 0.0);
            wu += w * u;
        }
        double* gp = g.ptr() + i * m;
        const bool tiny = std::sqrt(ns) <= kNormFloor;
        for (int64_t j = 0; j < m; ++j) {
            const double u = s[j] / rs, v = t[j] / rt;
            const double w = u > v ? 1.0 : (u < v ? -1.0 : 0.0);
            gp[j] = (tiny ? w : (w - u * wu)) / (rs * n);
        }
    }
    return g;
}

double lwm_penalty(const Tensor& student_maps, const Tensor& teacher_maps,
                   const Tensor& student_logits, const Tensor& teacher_logits,
                   double beta, double gamma, double T) {
    double p = 0.0;
    if (beta != 0.0) p += beta * attention_l1(student_maps, teacher_maps);
    if (gamma != 0.0) p += gamma * lwf_penalty(student_logits, teacher_logits, T);
    return p;
}

double quadratic_penalty(const std::vector<double>& theta, const std::vector<double>& anchor,
                         const std::vector<double>& omega, double lambda) {
    if (theta.size() != anchor.size() || theta.size() != omega.size())
        throw ShapeMismatch("quadratic penalty operands disagree in length");
    double total = 0.0;
    for (size_t i = 0; i < theta.size(); ++i) {
        const double d = theta[i] - anchor[i];
        total += omega[i] * d * d;
    }
    return lambda * total;
}

void quadratic_penalty_grad(const std::vector<double>& theta, const std::vector<double>& anchor,
                            const std::vector<double>& omega, double lambda,
                            std::vector<double>& grad_accum) {
    for (size_t i = 0; i < theta.size(); ++i)
        grad_accum[i] += 2.0 * lambda * omega[i] * (theta[i] - anchor[i]);
}

std::vector<double> ewc_fuse(const std::vector<double>& omega_old,
                             const std::vector<double>& fisher, double alpha) {
    if (omega_old.size() != fisher.size())
        throw ShapeMismatch("ewc fusion operands disagree in length");
    std::vector<double> out(fisher.size());
    for (size_t i = 0; i < fisher.size(); ++i)
        out[i] = alpha * omega_old[i] + (1.0 - alpha) * fisher[i];
    return out;
}

void pathint_accumulate(std::vector<double>& path_accum, const std::vector<double>& grad,
                        const std::vector<double>& step_delta) {
    if (grad.size() != path_accum.size() || step_delta.size() != path_accum.size())
        throw ShapeMismatch("path integral accumulation length mismatch");
    for (size_t i = 0; i < path_accum.size(); ++i) path_accum[i] += -grad[i] * step_delta[i];
}

std::vector<double> pathint_consolidate(std::vector<double>& omega,
                                        const std::vector<double>& path_accum,
                                        const std::vector<double>& total_delta, double xi) {
    std::vector<double> contribution(path_accum.size());
    for (size_t i = 0; i < path_accum.size(); ++i) {
        const double c = path_accum[i] / (total_delta[i] * total_delta[i] + xi);
        contribution[i] = c > 0.0 ? c : 0.0;
        omega[i] += contribution[i];
    }
    return contribution;
}

std::vector<double> fisher_diagonal(DifferentiableClassifier& model) {
    const int n = model.sample_count();
    const int k = model.class_count();
    std::vector<double> fisher;
    for (int i = 0; i < n; ++i) {
        const std::vector<double> z = model.forward_logits(i);
        if (static_cast<int>(z.size()) != k)
            throw ShapeMismatch("fisher: logit width mismatch");
        std::vector<double> p(static_cast<size_t>(k));
        double mx = -1e300, sum = 0.0;
        for (int c = 0; c < k; ++c) mx = std::max(mx, z[static_cast<size_t>(c)]);
        for (int c = 0; c < k; ++c) {
            p[static_cast<size_t>(c)] = std::exp(z[static_cast<size_t>(c)] - mx);
            sum += p[static_cast<size_t>(c)];
        }
        for (double& v : p) v /= sum;
        for (int c = 0; c < k; ++c) {
            std::vector<double> seed(p);
            for (double& v : seed) v = -v;
            seed[static_cast<size_t>(c)] += 1.0; // d log p_c / d z = e_c - p
            model.zero_grads();
            model.backward_logits(i, seed);
            const std::vector<double> g = model.grads();
            if (fisher.empty()) fisher.assign(g.size(), 0.0);
            for (size_t j = 0; j < g.size(); ++j)
                fisher[j] += p[static_cast<size_t>(c)] * g[j] * g[j];
        }
    }
    if (n > 0)
        for (double& v : fisher) v /= n;
    return fisher;
}

// ---------------------------------------------------------------------------
// gradcam
// ---------------------------------------------------------------------------

GradcamResult gradcam_maps(const Tensor& last_act, const nn::Linear& fc,
                           const std::vector<int>& classes) {
    last_act.require_ndim(4, "gradcam input");
    const int n = last_act.dim(0), c = last_act.dim(1), h = last_act.dim(2), w = last_act.dim(3);
    if (static_cast<int>(classes.size()) != n)
        throw ShapeMismatch("gradcam needs one class per sample");
    if (fc.in_dim != c)
        throw ShapeMismatch("gradcam: head feature dim != channel count");
    GradcamResult r;
    r.classes = classes;
    r.pre = Tensor({n, h, w});
    r.maps = Tensor({n, h, w});
    const double scale = 1.0 / (h * w);
    for (int i = 0; i < n; ++i) {
        const double* wrow =
            fc.weight.value.ptr() + static_cast<int64_t>(classes[static_cast<size_t>(i)]) * c;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int ch = 0; ch < c; ++ch) acc += wrow[ch] * last_act.at4(i, ch, y, x);
                acc *= scale;
                r.pre.data[(static_cast<size_t>(i) * h + y) * w + x] = acc;
                r.maps.data[(static_cast<size_t>(i) * h + y) * w + x] = acc > 0.0 ? acc : 0.0;
            }
    }
    return r;
}

Tensor gradcam_backward(const GradcamResult& res, const Tensor& gmaps, const Tensor& last_act,
                        nn::Linear& fc, bool accumulate_head_grads) {
    const int n = last_act.dim(0), c = last_act.dim(1), h = last_act.dim(2), w = last_act.dim(3);
    const double scale = 1.0 / (h * w);
    Tensor gact(last_act.shape);
    for (int i = 0; i < n; ++i) {
        const int cls = res.classes[static_cast<size_t>(i)];
        const double* wrow = fc.weight.value.ptr() + static_cast<int64_t>(cls) * c;
        double* gwrow = fc.weight.grad.ptr() + static_cast<int64_t>(cls) * c;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const size_t idx = (static_cast<size_t>(i) * h + y) * w + x;
                if (res.pre.data[idx] <= 0.0) continue;
                const double g = gmaps.data[idx] * scale;
                for (int ch = 0; ch < c; ++ch) {
                    gact.at4(i, ch, y, x) += g * wrow[ch];
                    if (accumulate_head_grads && fc.weight.trainable)
                        gwrow[ch] += g * last_act.at4(i, ch, y, x);
                }
            }
    }
    return gact;
}

// ---------------------------------------------------------------------------
// state
// ---------------------------------------------------------------------------

void RegularizerState::ensure_layout(Assembly& a) {
    std::vector<std::pair<std::string, int64_t>> current;
    int64_t total = 0;
    for (auto& [name, p] : a.named_trainable_params()) {
        current.emplace_back(name, p->numel());
        total += p->numel();
    }
    if (layout.empty()) {
        layout = std::move(current);
        omega.assign(static_cast<size_t>(total), 0.0);
        anchor.assign(static_cast<size_t>(total), 0.0);
        path_accum.assign(static_cast<size_t>(total), 0.0);
        return;
    }
    if (layout != current)
        throw ShapeMismatch("regularizer state does not match the trainable parameter set");
}

void RegularizerState::save(const std::string& path) const {
    io::Checkpoint c;
    nlohmann::json jl = nlohmann::json::array();
    for (const auto& [name, numel] : layout) jl.push_back({{"name", name}, {"numel", numel}});
    c.meta = {{"kind", "regularizer_state"}, {"regularizer", to_string(kind)}, {"layout", jl}};
    auto put_vec = [&c](const char* name, const std::vector<double>& v) {
        c.put(name, {static_cast<int>(v.size())}, v);
    };
    put_vec("omega", omega);
    put_vec("anchor", anchor);
    put_vec("path_accum", path_accum);
    put_vec("session_start", session_start);
    c.save(path);
}

RegularizerState RegularizerState::load(const std::string& path) {
    const io::Checkpoint c = io::Checkpoint::load(path);
    RegularizerState s;
    s.kind = regularizer_kind_from_string(c.meta.at("regularizer").get<std::string>());
    for (const auto& e : c.meta.at("layout"))
        s.layout.emplace_back(e.at("name").get<std::string>(), e.at("numel").get<int64_t>());
    s.omega = c.get("omega");
    s.anchor = c.get("anchor");
    s.path_accum = c.get("path_accum");
    s.session_start = c.get("session_start");
    return s;
}

} // namespace itcl
