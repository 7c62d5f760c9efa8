#pragma once

#include <cstddef>
#include <numeric>
#include <vector>

#include "cars/errors.hpp"

namespace cars {

// Dense row-major float32 tensor. Shapes are small (at most NCHW), so a
// plain vector plus a shape list is all we need.
struct Tensor {
    std::vector<int> shape;
    std::vector<float> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        data.assign(numel_of(shape), 0.0f);
    }
    Tensor(std::vector<int> s, std::vector<float> d) : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != numel_of(shape)) throw StructuralError("tensor data/shape mismatch");
    }

    static size_t numel_of(const std::vector<int>& s) {
        size_t n = 1;
        for (int d : s) n *= static_cast<size_t>(d);
        return n;
    }

    size_t numel() const { return data.size(); }
    int dim(size_t i) const { return shape[i]; }

    static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape); }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

} // namespace cars
