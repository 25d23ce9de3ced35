#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "itcl/input_transforms.hpp"

using namespace itcl;
using testutil::fd_gradient;
using testutil::max_rel_error;
using testutil::random_tensor;

TEST_CASE("closed-form parameter counts") {
    CHECK(param_count({TransformKind::pad, 32, 224, 3, "", false, Interp::bilinear}) == 73728);
    CHECK(param_count({TransformKind::pad, 8, 224, 3, "", false, Interp::bilinear}) == 20736);
    CHECK(param_count({TransformKind::add, 0, 224, 3, "", false, Interp::bilinear}) == 150528);
    CHECK(param_count({TransformKind::pad_latent, 2, 56, 64, "stem", false, Interp::bilinear}) ==
          27648);
    CHECK(param_count({TransformKind::pad, 0, 224, 3, "", false, Interp::bilinear}) == 0);
}

TEST_CASE("pad: interior preservation and zero-frame border") {
    std::mt19937_64 rng(11);
    const int S = 12, p = 2, C = 3, N = 2;
    auto x = random_tensor({N, C, S - 2 * p, S - 2 * p}, rng);

    SUBCASE("zero frame") {
        Tensor theta({C * (S * S - (S - 2 * p) * (S - 2 * p))});
        Tensor y = apply_pad(x, theta, S, p);
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c)
                for (int i = 0; i < S; ++i)
                    for (int j = 0; j < S; ++j) {
                        const bool border =
                            i < p || i >= S - p || j < p || j >= S - p;
                        if (border)
                            CHECK(y.at4(n, c, i, j) == 0.0);
                        else
                            CHECK(y.at4(n, c, i, j) == x.at4(n, c, i - p, j - p));
                    }
    }
    SUBCASE("arbitrary frame keeps the interior bit-exact") {
        auto theta = random_tensor({C * (S * S - (S - 2 * p) * (S - 2 * p))}, rng);
        Tensor y = apply_pad(x, theta.data.size() == 0 ? theta : theta, S, p);
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c)
                for (int i = 0; i < S - 2 * p; ++i)
                    for (int j = 0; j < S - 2 * p; ++j)
                        CHECK(y.at4(n, c, i + p, j + p) == x.at4(n, c, i, j));
    }
    SUBCASE("wrong inner side") {
        auto bad = random_tensor({N, C, S, S}, rng);
        Tensor theta({C * (S * S - (S - 2 * p) * (S - 2 * p))});
        CHECK_THROWS_AS(apply_pad(bad, theta, S, p), ShapeMismatch);
    }
}

TEST_CASE("add: identities and linearity") {
    std::mt19937_64 rng(12);
    auto x = random_tensor({2, 3, 6, 6}, rng);
    Tensor zero({3 * 6 * 6});

    Tensor y = apply_add(x, zero);
    CHECK(y.data == x.data);

    Tensor xz({2, 3, 6, 6});
    auto theta = random_tensor({3 * 6 * 6}, rng);
    Tensor alone = apply_add(xz, theta);
    for (int n = 0; n < 2; ++n)
        for (int64_t i = 0; i < theta.numel(); ++i)
            CHECK(alone.data[static_cast<size_t>(n * theta.numel() + i)] ==
                  theta.data[static_cast<size_t>(i)]);

    auto ta = random_tensor({3 * 6 * 6}, rng);
    auto tb = random_tensor({3 * 6 * 6}, rng);
    Tensor tsum({3 * 6 * 6});
    for (size_t i = 0; i < tsum.data.size(); ++i) tsum.data[i] = ta.data[i] + tb.data[i];
    Tensor once = apply_add(x, tsum);
    Tensor twice = apply_add(apply_add(x, ta), tb);
    CHECK(max_rel_error(once.data, twice.data) < 1e-12);

    CHECK_THROWS_AS(apply_add(x, Tensor({5})), ShapeMismatch);
}

TEST_CASE("transform gradients match central finite differences") {
    std::mt19937_64 rng(13);
    // 3x8x8 instances as in the acceptance gate
    const int S = 8, p = 2, C = 3, N = 2;

    SUBCASE("pad") {
        auto x = random_tensor({N, C, S - 2 * p, S - 2 * p}, rng);
        auto theta = random_tensor({C * (S * S - (S - 2 * p) * (S - 2 * p))}, rng);
        auto lw = random_tensor({N, C, S, S}, rng);
        auto loss = [&]() {
            Tensor y = apply_pad(x, theta, S, p);
            double s = 0;
            for (size_t i = 0; i < y.data.size(); ++i) s += y.data[i] * lw.data[i];
            return s;
        };
        Tensor gx, gtheta(theta.shape);
        pad_backward(lw, S, p, &gx, &gtheta);
        CHECK(max_rel_error(gtheta.data, fd_gradient(loss, theta.data)) < 1e-4);
        CHECK(max_rel_error(gx.data, fd_gradient(loss, x.data)) < 1e-4);
    }
    SUBCASE("add") {
        auto x = random_tensor({N, C, S, S}, rng);
        auto theta = random_tensor({C * S * S}, rng);
        auto lw = random_tensor({N, C, S, S}, rng);
        auto loss = [&]() {
            Tensor y = apply_add(x, theta);
            double s = 0;
            for (size_t i = 0; i < y.data.size(); ++i) s += y.data[i] * lw.data[i];
            return s;
        };
        Tensor gx, gtheta(theta.shape);
        add_backward(lw, &gx, &gtheta);
        CHECK(max_rel_error(gtheta.data, fd_gradient(loss, theta.data)) < 1e-4);
        CHECK(max_rel_error(gx.data, fd_gradient(loss, x.data)) < 1e-4);
    }
    SUBCASE("pad_latent reuses the same border math on feature maps") {
        // 5-channel latent map, thickness 1
        const int L = 6, q = 1, ch = 5;
        auto a = random_tensor({N, ch, L - 2 * q, L - 2 * q}, rng);
        auto theta = random_tensor({ch * (L * L - (L - 2 * q) * (L - 2 * q))}, rng);
        auto lw = random_tensor({N, ch, L, L}, rng);
        auto loss = [&]() {
            Tensor y = apply_pad(a, theta, L, q);
            double s = 0;
            for (size_t i = 0; i < y.data.size(); ++i) s += y.data[i] * lw.data[i];
            return s;
        };
        Tensor ga, gtheta(theta.shape);
        pad_backward(lw, L, q, &ga, &gtheta);
        CHECK(max_rel_error(gtheta.data, fd_gradient(loss, theta.data)) < 1e-4);
        CHECK(max_rel_error(ga.data, fd_gradient(loss, a.data)) < 1e-4);
    }
}

TEST_CASE("frame canvas layout round-trips through apply_pad") {
    std::mt19937_64 rng(14);
    TransformConfig cfg{TransformKind::pad, 2, 8, 2, "", false, Interp::bilinear};
    TransformParams tp = TransformParams::allocate(cfg, -1);
    CHECK(tp.theta.numel() == param_count(cfg));
    for (int64_t i = 0; i < tp.theta.numel(); ++i)
        tp.theta.value.data[static_cast<size_t>(i)] = static_cast<double>(i) + 1;

    Tensor canvas = frame_to_canvas(tp);
    Tensor x({1, 2, 4, 4});
    Tensor y = apply_pad(x, tp.theta.value, 8, 2);
    for (int c = 0; c < 2; ++c)
        for (int i = 0; i < 8; ++i)
            for (int j = 0; j < 8; ++j)
                CHECK(y.at4(0, c, i, j) ==
                      canvas.data[(static_cast<size_t>(c) * 8 + i) * 8 + j]);
}

TEST_CASE("resize: identity and constant preservation") {
    std::mt19937_64 rng(15);
    auto x = random_tensor({2, 3, 10, 10}, rng);
    CHECK(resize_images(x, 10, Interp::bilinear).data == x.data);

    Tensor flat = Tensor::full({1, 1, 9, 9}, 3.25);
    for (const Interp interp : {Interp::bilinear, Interp::nearest}) {
        Tensor small = resize_images(flat, 5, interp);
        for (double v : small.data) CHECK(v == doctest::Approx(3.25).epsilon(1e-12));
    }
}
