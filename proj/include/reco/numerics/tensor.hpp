#pragma once

#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "reco/common/error.hpp"
#include "reco/common/rng.hpp"

namespace reco::num {

// Dense row-major tensor of doubles. Rank 1 and rank 2 cover everything the
// models here need; shape product always equals data length.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;
    bool requires_grad = false;

    Tensor() = default;
    Tensor(std::vector<std::size_t> s, std::vector<double> d, bool rg = false)
        : shape(std::move(s)), data(std::move(d)), requires_grad(rg) {
        if (numel(shape) != data.size()) {
            throw ShapeError("tensor: shape product " + std::to_string(numel(shape)) +
                             " != data length " + std::to_string(data.size()));
        }
    }

    static std::size_t numel(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        return n;
    }

    static Tensor zeros(std::vector<std::size_t> shape) {
        std::size_t n = numel(shape);
        return Tensor(std::move(shape), std::vector<double>(n, 0.0));
    }

    static Tensor full(std::vector<std::size_t> shape, double v) {
        std::size_t n = numel(shape);
        return Tensor(std::move(shape), std::vector<double>(n, v));
    }

    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    static Tensor vector(std::vector<double> d) {
        std::size_t n = d.size();
        return Tensor({n}, std::move(d));
    }

    static Tensor randn(std::vector<std::size_t> shape, Rng& rng, double stddev = 1.0) {
        std::size_t n = numel(shape);
        std::vector<double> d(n);
        for (auto& x : d) x = rng.normal(0.0, stddev);
        return Tensor(std::move(shape), std::move(d));
    }

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t rows() const { return shape.empty() ? 1 : shape[0]; }
    std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }
    bool is_scalar() const { return size() == 1; }

    double& at(std::size_t i) { return data[i]; }
    double at(std::size_t i) const { return data[i]; }
    double& at(std::size_t i, std::size_t j) { return data[i * cols() + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols() + j]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    std::string shape_str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape[i]);
        }
        return s + "]";
    }
};

}  // namespace reco::num
