#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "itcl/nn.hpp"
#include "itcl/tensor.hpp"

namespace testutil {

inline itcl::Tensor random_tensor(std::vector<int> shape, std::mt19937_64& rng,
                                  double scale = 1.0) {
    itcl::Tensor t(std::move(shape));
    std::normal_distribution<double> N(0.0, scale);
    for (double& v : t.data) v = N(rng);
    return t;
}

// Central finite differences of `f` w.r.t. the entries of `x`.
inline std::vector<double> fd_gradient(const std::function<double()>& f, std::vector<double>& x,
                                       double h = 1e-6) {
    std::vector<double> g(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double up = f();
        x[i] = keep - h;
        const double dn = f();
        x[i] = keep;
        g[i] = (up - dn) / (2.0 * h);
    }
    return g;
}

// max relative error with an absolute floor
inline double max_rel_error(const std::vector<double>& a, const std::vector<double>& b,
                            double floor = 1e-7) {
    double worst = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double denom = std::max(floor, std::max(std::abs(a[i]), std::abs(b[i])));
        worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
    }
    return worst;
}

} // namespace testutil
