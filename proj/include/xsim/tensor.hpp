#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

namespace xsim {

// Dense row-major tensor of doubles. Feature maps are laid out [C, H, W],
// vectors [N]. Small fixed-rank shapes only; no broadcasting, no views.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;

    explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(numel_of(shape), 0.0) {}

    Tensor(std::vector<int> s, double fill)
        : shape(std::move(s)), data(numel_of(shape), fill) {}

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
    std::size_t numel() const { return data.size(); }
    bool empty() const { return data.empty(); }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    // [C,H,W] accessor
    double& operator()(int c, int i, int j) {
        assert(rank() == 3);
        return data[(static_cast<std::size_t>(c) * dim(1) + i) * dim(2) + j];
    }
    double operator()(int c, int i, int j) const {
        assert(rank() == 3);
        return data[(static_cast<std::size_t>(c) * dim(1) + i) * dim(2) + j];
    }

    // [H,W] accessor
    double& operator()(int i, int j) {
        assert(rank() == 2);
        return data[static_cast<std::size_t>(i) * dim(1) + j];
    }
    double operator()(int i, int j) const {
        assert(rank() == 2);
        return data[static_cast<std::size_t>(i) * dim(1) + j];
    }

    void zero() { std::fill(data.begin(), data.end(), 0.0); }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }

    static std::size_t numel_of(const std::vector<int>& shape) {
        std::size_t n = 1;
        for (int d : shape) n *= static_cast<std::size_t>(d);
        return shape.empty() ? 0 : n;
    }
};

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    assert(a.numel() == b.numel());
    double m = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        double d = std::abs(a[i] - b[i]);
        if (d > m) m = d;
    }
    return m;
}

}  // namespace xsim
