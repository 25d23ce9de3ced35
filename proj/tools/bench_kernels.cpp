// Timing comparison between the serial reference kernels and the OpenMP
// ones, on shapes matching the desk-scale and resnet18 workloads.

#include <chrono>
#include <cstdio>
#include <random>
#include <vector>

#include "itcl/kernels.hpp"

using namespace itcl;

namespace {

struct ConvCase {
    const char* name;
    int n, c, h, oc, k, stride, pad;
};

double run_conv(const ConvCase& cs, kernels::Exec exec, int reps, double* checksum) {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> U(-1, 1);
    const int oh = kernels::conv_out_side(cs.h, cs.k, cs.stride, cs.pad);
    std::vector<double> x(static_cast<size_t>(cs.n) * cs.c * cs.h * cs.h);
    std::vector<double> w(static_cast<size_t>(cs.oc) * cs.c * cs.k * cs.k);
    std::vector<double> y(static_cast<size_t>(cs.n) * cs.oc * oh * oh);
    for (auto& v : x) v = U(rng);
    for (auto& v : w) v = U(rng);

    const auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r)
        kernels::conv2d_forward(x.data(), cs.n, cs.c, cs.h, cs.h, w.data(), cs.oc, cs.k,
                                cs.stride, cs.pad, y.data(), exec);
    const double sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / reps;
    *checksum = 0;
    for (double v : y) *checksum += v;
    return sec;
}

double run_linear(int n, int in, int out, kernels::Exec exec, int reps, double* checksum) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(-1, 1);
    std::vector<double> x(static_cast<size_t>(n) * in), w(static_cast<size_t>(out) * in),
        b(static_cast<size_t>(out)), y(static_cast<size_t>(n) * out);
    for (auto& v : x) v = U(rng);
    for (auto& v : w) v = U(rng);
    for (auto& v : b) v = U(rng);
    const auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r)
        kernels::linear_forward(x.data(), n, in, w.data(), b.data(), out, y.data(), exec);
    const double sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / reps;
    *checksum = 0;
    for (double v : y) *checksum += v;
    return sec;
}

} // namespace

int main() {
    std::printf("threads available: %d\n", kernels::max_threads());
    std::printf("%-28s %12s %12s %8s %s\n", "kernel", "serial (ms)", "openmp (ms)", "speedup",
                "bit-identical");

    const ConvCase cases[] = {
        {"conv 16x8x24x24 k3", 16, 8, 24, 8, 3, 1, 1},
        {"conv 16x16x12x12 k3", 16, 16, 12, 16, 3, 1, 1},
        {"conv 8x64x56x56 k3 (deep)", 8, 64, 56, 64, 3, 1, 1},
    };
    for (const ConvCase& cs : cases) {
        double sum_s = 0, sum_p = 0;
        const int reps = cs.c >= 64 ? 2 : 10;
        const double ser = run_conv(cs, kernels::Exec::serial, reps, &sum_s);
        const double par = run_conv(cs, kernels::Exec::openmp, reps, &sum_p);
        std::printf("%-28s %12.3f %12.3f %7.2fx %s\n", cs.name, ser * 1e3, par * 1e3, ser / par,
                    sum_s == sum_p ? "yes" : "NO");
    }
    {
        double sum_s = 0, sum_p = 0;
        const double ser = run_linear(64, 512, 100, kernels::Exec::serial, 50, &sum_s);
        const double par = run_linear(64, 512, 100, kernels::Exec::openmp, 50, &sum_p);
        std::printf("%-28s %12.3f %12.3f %7.2fx %s\n", "linear 64x512 -> 100", ser * 1e3,
                    par * 1e3, ser / par, sum_s == sum_p ? "yes" : "NO");
    }
    return 0;
}
