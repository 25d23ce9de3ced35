#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "itcl/regularizers.hpp"

using namespace itcl;
using testutil::fd_gradient;
using testutil::max_rel_error;
using testutil::random_tensor;

TEST_CASE("lwf: self-distillation is zero, derived value, flattening limit") {
    std::mt19937_64 rng(41);
    auto z = random_tensor({3, 5}, rng);
    CHECK(std::abs(lwf_penalty(z, z, 2.0)) < 1e-7);

    // teacher (2,0), student (0,2), T=2 -> KL(softmax((1,0)) || softmax((0,1)))
    Tensor teacher({1, 2}, {2.0, 0.0});
    Tensor student({1, 2}, {0.0, 2.0});
    const double p0 = std::exp(1.0) / (std::exp(1.0) + 1.0);
    const double q0 = 1.0 / (std::exp(1.0) + 1.0);
    const double want = p0 * std::log(p0 / q0) + (1 - p0) * std::log((1 - p0) / (1 - q0));
    CHECK(lwf_penalty(student, teacher, 2.0) == doctest::Approx(want).epsilon(1e-12));

    CHECK(lwf_penalty(student, teacher, 1e6) < 1e-10); // distributions flatten
    CHECK(lwf_penalty(student, teacher, 2.0) >= 0.0);
}

TEST_CASE("lwf gradient matches finite differences") {
    std::mt19937_64 rng(42);
    auto s = random_tensor({4, 6}, rng);
    auto t = random_tensor({4, 6}, rng);
    Tensor g = lwf_penalty_backward(s, t, 2.0);
    auto f = [&]() { return lwf_penalty(s, t, 2.0); };
    CHECK(max_rel_error(g.data, fd_gradient(f, s.data)) < 1e-4);
}

TEST_CASE("attention term: hand-built 2x2 maps and reductions") {
    Tensor sm({1, 2, 2}, {1, 0, 0, 0});
    Tensor tm({1, 2, 2}, {0, 1, 0, 0});
    CHECK(attention_l1(sm, tm) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(attention_l1(sm, sm) == 0.0);

    std::mt19937_64 rng(43);
    auto smaps = random_tensor({3, 4, 4}, rng);
    auto tmaps = random_tensor({3, 4, 4}, rng);
    auto slogits = random_tensor({3, 4}, rng);
    auto tlogits = random_tensor({3, 4}, rng);
    // beta = 0 reduces exactly to gamma * lwf
    CHECK(lwm_penalty(smaps, tmaps, slogits, tlogits, 0.0, 0.7, 2.0) ==
          0.7 * lwf_penalty(slogits, tlogits, 2.0));
    // gamma = 0, beta = 1 on the hand-built maps
    CHECK(lwm_penalty(sm, tm, slogits, tlogits, 1.0, 0.0, 2.0) ==
          doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("attention gradient matches finite differences") {
    std::mt19937_64 rng(44);
    auto s = random_tensor({2, 3, 3}, rng);
    auto t = random_tensor({2, 3, 3}, rng);
    Tensor g = attention_l1_backward(s, t);
    auto f = [&]() { return attention_l1(s, t); };
    // |.| kinks: keep h small relative to typical map entries
    CHECK(max_rel_error(g.data, fd_gradient(f, s.data, 1e-7), 1e-5) < 1e-4);
}

TEST_CASE("ewc penalty: zero cases and the (1,2)x(1,-1) example") {
    std::vector<double> theta = {0.3, -0.7};
    CHECK(quadratic_penalty(theta, theta, {1.0, 2.0}, 1.0) == 0.0);
    std::vector<double> anchor = {-0.7, 0.3};
    std::vector<double> moved = {anchor[0] + 1.0, anchor[1] - 1.0};
    CHECK(quadratic_penalty(moved, anchor, {1.0, 2.0}, 1.0) ==
          doctest::Approx(3.0).epsilon(1e-12));
    CHECK(quadratic_penalty(moved, anchor, {1.0, 2.0}, 0.0) == 0.0);

    std::vector<double> grad(2, 0.0);
    quadratic_penalty_grad(moved, anchor, {1.0, 2.0}, 1.5, grad);
    std::mt19937_64 rng(45);
    auto f = [&]() { return quadratic_penalty(moved, anchor, {1.0, 2.0}, 1.5); };
    CHECK(max_rel_error(grad, fd_gradient(f, moved)) < 1e-6);
}

TEST_CASE("ewc fusion is a convex combination") {
    std::mt19937_64 rng(46);
    std::uniform_real_distribution<double> U(0, 2);
    std::vector<double> old(16), fresh(16);
    for (auto& v : old) v = U(rng);
    for (auto& v : fresh) v = U(rng);

    // first session: fusing with zero gives 0.5 * F at alpha = 0.5
    std::vector<double> first = ewc_fuse(std::vector<double>(16, 0.0), fresh, 0.5);
    for (size_t i = 0; i < fresh.size(); ++i)
        CHECK(first[i] == doctest::Approx(0.5 * fresh[i]).epsilon(1e-15));

    std::vector<double> fused = ewc_fuse(old, fresh, 0.5);
    for (size_t i = 0; i < fused.size(); ++i) {
        CHECK(fused[i] >= std::min(old[i], fresh[i]) - 1e-15);
        CHECK(fused[i] <= std::max(old[i], fresh[i]) + 1e-15);
    }
}

namespace {

// two-parameter linear-softmax toy: logits = (w1 x, w2 x)
struct ToyModel final : DifferentiableClassifier {
    std::vector<double> xs;
    double w1, w2;
    std::vector<double> g{0.0, 0.0};

    int sample_count() const override { return static_cast<int>(xs.size()); }
    int class_count() const override { return 2; }
    std::vector<double> forward_logits(int i) override {
        return {w1 * xs[static_cast<size_t>(i)], w2 * xs[static_cast<size_t>(i)]};
    }
    void backward_logits(int i, const std::vector<double>& seed) override {
        g[0] += seed[0] * xs[static_cast<size_t>(i)];
        g[1] += seed[1] * xs[static_cast<size_t>(i)];
    }
    void zero_grads() override { g = {0.0, 0.0}; }
    std::vector<double> grads() const override { return g; }
};

} // namespace

TEST_CASE("fisher on the toy model matches the brute-force per-sample oracle") {
    ToyModel toy;
    toy.xs = {0.5, -1.0, 2.0, 0.25};
    toy.w1 = 0.8;
    toy.w2 = -0.4;

    const std::vector<double> fisher = fisher_diagonal(toy);
    REQUIRE(fisher.size() == 2);

    // oracle: direct evaluation of mean_i sum_c p_c (d log p_c / d w_j)^2
    double f1 = 0, f2 = 0;
    for (double x : toy.xs) {
        const double z0 = toy.w1 * x, z1 = toy.w2 * x;
        const double m = std::max(z0, z1);
        const double e0 = std::exp(z0 - m), e1 = std::exp(z1 - m);
        const double p0 = e0 / (e0 + e1), p1 = e1 / (e0 + e1);
        // d log p_c / d w1 = (delta_{c,0} - p0) x ; same for w2 with class 1
        f1 += p0 * (1 - p0) * x * (1 - p0) * x + p1 * (0 - p0) * x * (0 - p0) * x;
        f2 += p0 * (0 - p1) * x * (0 - p1) * x + p1 * (1 - p1) * x * (1 - p1) * x;
    }
    f1 /= static_cast<double>(toy.xs.size());
    f2 /= static_cast<double>(toy.xs.size());
    CHECK(fisher[0] == doctest::Approx(f1).epsilon(1e-6));
    CHECK(fisher[1] == doctest::Approx(f2).epsilon(1e-6));
}

TEST_CASE("fisher: a parameter with identically zero gradient has zero entry") {
    ToyModel toy;
    toy.xs = {0.0, 0.0, 0.0}; // x = 0 kills both gradients
    toy.w1 = 1.0;
    toy.w2 = 2.0;
    const std::vector<double> fisher = fisher_diagonal(toy);
    CHECK(fisher[0] == 0.0);
    CHECK(fisher[1] == 0.0);
}

TEST_CASE("path integral: accumulation, consolidation, clipping") {
    SUBCASE("no steps, no importance") {
        std::vector<double> omega(3, 0.0), accum(3, 0.0), delta(3, 0.0);
        auto c = pathint_consolidate(omega, accum, delta, 0.1);
        CHECK(omega == std::vector<double>{0, 0, 0});
        CHECK(c == std::vector<double>{0, 0, 0});
    }
    SUBCASE("single-step derived example: 0.1 / (0.01 + 0.1)") {
        std::vector<double> accum(1, 0.0);
        pathint_accumulate(accum, {-1.0}, {0.1}); // g = -1, step = 0.1
        CHECK(accum[0] == doctest::Approx(0.1).epsilon(1e-15));
        std::vector<double> omega(1, 0.0);
        pathint_consolidate(omega, accum, {0.1}, 0.1);
        CHECK(omega[0] == doctest::Approx(0.1 / (0.01 + 0.1)).epsilon(1e-12));
        CHECK(omega[0] == doctest::Approx(0.9090909090909).epsilon(1e-9));
    }
    SUBCASE("frozen parameter contributes nothing") {
        std::vector<double> accum(2, 0.0);
        pathint_accumulate(accum, {0.7, -0.3}, {0.0, 0.05});
        CHECK(accum[0] == 0.0);
        std::vector<double> omega(2, 0.0);
        pathint_consolidate(omega, accum, {0.0, 0.05}, 0.1);
        CHECK(omega[0] == 0.0);
        CHECK(omega[1] > 0.0);
    }
    SUBCASE("negative accumulations clip to zero") {
        std::vector<double> omega(1, 0.0), accum = {-0.5};
        auto c = pathint_consolidate(omega, accum, {0.2}, 0.1);
        CHECK(omega[0] == 0.0);
        CHECK(c[0] == 0.0);
    }
}

TEST_CASE("gradcam composition: penalty gradient w.r.t. student parameters") {
    std::mt19937_64 rng(47);
    // toy stand-in for the network tail: activations [N,C,H,W] + linear head
    const int n = 2, c = 4, h = 3, w = 3;
    auto act = random_tensor({n, c, h, w}, rng);
    nn::Linear fc(c, 5);
    fc.init(rng);
    fc.weight.trainable = true;
    std::vector<int> classes = {1, 3};
    auto teacher_maps = random_tensor({n, h, w}, rng, 0.5);
    for (double& v : teacher_maps.data) v = std::abs(v);

    auto loss = [&]() {
        GradcamResult r = gradcam_maps(act, fc, classes);
        return attention_l1(r.maps, teacher_maps);
    };

    GradcamResult r = gradcam_maps(act, fc, classes);
    Tensor gmaps = attention_l1_backward(r.maps, teacher_maps);
    fc.weight.zero_grad();
    Tensor gact = gradcam_backward(r, gmaps, act, fc, /*accumulate_head_grads=*/true);

    CHECK(max_rel_error(gact.data, fd_gradient(loss, act.data, 1e-7), 1e-5) < 1e-4);
    CHECK(max_rel_error(fc.weight.grad.data, fd_gradient(loss, fc.weight.value.data, 1e-7),
                        1e-5) < 1e-4);

    // identical student and teacher features: penalty vanishes
    GradcamResult same = gradcam_maps(act, fc, classes);
    CHECK(std::abs(attention_l1(r.maps, same.maps)) < 1e-6);
}

TEST_CASE("regularizer state round-trips through its checkpoint") {
    RegularizerState s;
    s.kind = RegularizerKind::ewc;
    s.layout = {{"head.fc.weight", 12}, {"head.fc.bias", 3}};
    s.omega = std::vector<double>(15, 0.25);
    s.anchor = std::vector<double>(15, -1.5);
    s.path_accum = std::vector<double>(15, 0.0);
    s.session_start = std::vector<double>(15, 2.0);
    s.save("build_test_regstate.bin");
    RegularizerState t = RegularizerState::load("build_test_regstate.bin");
    CHECK(t.kind == RegularizerKind::ewc);
    CHECK(t.layout == s.layout);
    CHECK(t.omega == s.omega);
    CHECK(t.anchor == s.anchor);
    std::remove("build_test_regstate.bin");
}
