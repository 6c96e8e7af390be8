#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "cognisnn/error.hpp"

namespace cognisnn {

// Dense row-major tensor of doubles. Shapes are plain extent lists; all
// arithmetic in the engine is 64-bit.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<std::size_t> s, std::vector<double> d)
        : shape(std::move(s)), data(std::move(d)) {
        if (count(shape) != data.size())
            throw DimensionError("tensor: shape/data length mismatch");
    }

    static std::size_t count(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (auto e : s) n *= e;
        return n;
    }

    static Tensor zeros(std::vector<std::size_t> s) {
        std::size_t n = count(s);
        return Tensor(std::move(s), std::vector<double>(n, 0.0));
    }
    static Tensor full(std::vector<std::size_t> s, double v) {
        std::size_t n = count(s);
        return Tensor(std::move(s), std::vector<double>(n, v));
    }
    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t dim(std::size_t i) const { return shape.at(i); }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    double& at4(std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
        return data[((a * shape[1] + b) * shape[2] + c) * shape[3] + d];
    }
    double at4(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const {
        return data[((a * shape[1] + b) * shape[2] + c) * shape[3] + d];
    }
    double& at3(std::size_t a, std::size_t b, std::size_t c) {
        return data[(a * shape[1] + b) * shape[2] + c];
    }
    double at3(std::size_t a, std::size_t b, std::size_t c) const {
        return data[(a * shape[1] + b) * shape[2] + c];
    }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool all_binary() const {
        for (double v : data)
            if (v != 0.0 && v != 1.0) return false;
        return true;
    }

    double sum() const { return std::accumulate(data.begin(), data.end(), 0.0); }
    double mean() const { return data.empty() ? 0.0 : sum() / double(data.size()); }

    std::size_t nonzero_count() const {
        std::size_t n = 0;
        for (double v : data) n += (v != 0.0);
        return n;
    }
};

}  // namespace cognisnn
