#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "mixgen/common.hpp"

namespace mixgen {

// Flat row-major tensor with an optional gradient buffer of the same shape.
template <typename T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> v;
    std::vector<T> g;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        v.assign(size_t(numel()), T(0));
    }

    int64_t numel() const {
        int64_t n = 1;
        for (int d : shape) n *= d;
        return shape.empty() ? 0 : n;
    }
    int rows() const { return shape.empty() ? 0 : shape[0]; }
    int cols() const { return shape.size() < 2 ? 1 : shape[1]; }

    T& at(int i, int j) { return v[size_t(i) * size_t(cols()) + size_t(j)]; }
    T at(int i, int j) const { return v[size_t(i) * size_t(cols()) + size_t(j)]; }
    T& gat(int i, int j) { return g[size_t(i) * size_t(cols()) + size_t(j)]; }

    void ensure_grad() {
        if (g.size() != v.size()) g.assign(v.size(), T(0));
    }
    void zero_grad() {
        ensure_grad();
        std::fill(g.begin(), g.end(), T(0));
    }

    bool finite() const {
        for (T x : v)
            if (!std::isfinite(double(x))) return false;
        return true;
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.shape = shape;
        out.v.resize(v.size());
        for (size_t i = 0; i < v.size(); ++i) out.v[i] = U(v[i]);
        if (!g.empty()) {
            out.g.resize(g.size());
            for (size_t i = 0; i < g.size(); ++i) out.g[i] = U(g[i]);
        }
        return out;
    }
};

template <typename T>
T dot(const std::vector<T>& a, const std::vector<T>& b) {
    T s = 0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace mixgen
