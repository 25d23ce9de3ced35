#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "itcl/errors.hpp"

namespace itcl {

// Dense row-major tensor of doubles. Deliberately minimal: the heavy loops
// live in kernels.cpp and work on raw pointers.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s)
        : shape(std::move(s)), data(static_cast<size_t>(numel_of(shape)), 0.0) {}
    Tensor(std::vector<int> s, std::vector<double> d)
        : shape(std::move(s)), data(std::move(d)) {
        if (static_cast<int64_t>(data.size()) != numel_of(shape))
            throw ShapeMismatch("tensor data size does not match shape");
    }

    static int64_t numel_of(const std::vector<int>& s) {
        int64_t n = 1;
        for (int d : s) n *= d;
        return n;
    }
    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
    static Tensor full(std::vector<int> s, double v) {
        Tensor t(std::move(s));
        std::fill(t.data.begin(), t.data.end(), v);
        return t;
    }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int ndim() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }
    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    double* ptr() { return data.data(); }
    const double* ptr() const { return data.data(); }

    void zero_() { std::fill(data.begin(), data.end(), 0.0); }

    double& at2(int n, int c) { return data[static_cast<size_t>(n) * shape[1] + c]; }
    double at2(int n, int c) const { return data[static_cast<size_t>(n) * shape[1] + c]; }
    double& at4(int n, int c, int h, int w) {
        return data[((static_cast<size_t>(n) * shape[1] + c) * shape[2] + h) * shape[3] + w];
    }
    double at4(int n, int c, int h, int w) const {
        return data[((static_cast<size_t>(n) * shape[1] + c) * shape[2] + h) * shape[3] + w];
    }

    std::string shape_str() const {
        std::string s = "[";
        for (size_t i = 0; i < shape.size(); ++i) {
            if (i) s += "x";
            s += std::to_string(shape[i]);
        }
        return s + "]";
    }

    void require_shape(const std::vector<int>& s, const char* what) const {
        if (shape != s)
            throw ShapeMismatch(std::string(what) + ": got " + shape_str());
    }
    void require_ndim(int n, const char* what) const {
        if (ndim() != n)
            throw ShapeMismatch(std::string(what) + ": expected " + std::to_string(n) +
                                "-d tensor, got " + shape_str());
    }
};

} // namespace itcl
