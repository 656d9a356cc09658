#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hdsi/error.hpp"

namespace hdsi {

// Dense 3-mode tensor, row-major.
struct DenseTensor3 {
    std::array<std::size_t, 3> shape{0, 0, 0};
    std::vector<double> v;

    DenseTensor3() = default;
    DenseTensor3(std::size_t d0, std::size_t d1, std::size_t d2)
        : shape{d0, d1, d2}, v(d0 * d1 * d2, 0.0) {}

    std::size_t size() const { return v.size(); }
    std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
        return (i * shape[1] + j) * shape[2] + k;
    }
    double& at(std::size_t i, std::size_t j, std::size_t k) { return v[index(i, j, k)]; }
    double at(std::size_t i, std::size_t j, std::size_t k) const { return v[index(i, j, k)]; }
};

// Dense channels-first 4D tensor (channels, d1, d2, d3), row-major.
struct DenseTensor4 {
    std::array<std::size_t, 4> shape{0, 0, 0, 0};
    std::vector<double> v;

    DenseTensor4() = default;
    DenseTensor4(std::size_t c, std::size_t d0, std::size_t d1, std::size_t d2)
        : shape{c, d0, d1, d2}, v(c * d0 * d1 * d2, 0.0) {}

    std::size_t size() const { return v.size(); }
    std::size_t channels() const { return shape[0]; }
    std::size_t index(std::size_t c, std::size_t i, std::size_t j, std::size_t k) const {
        return ((c * shape[1] + i) * shape[2] + j) * shape[3] + k;
    }
    double& at(std::size_t c, std::size_t i, std::size_t j, std::size_t k) {
        return v[index(c, i, j, k)];
    }
    double at(std::size_t c, std::size_t i, std::size_t j, std::size_t k) const {
        return v[index(c, i, j, k)];
    }
};

// 3D convolution weights with cubic spatial extent:
// (out_channels, in_channels, k, k, k), row-major.
struct ConvKernel {
    std::size_t out_channels = 0;
    std::size_t in_channels = 0;
    std::size_t k = 0;
    std::vector<double> v;

    ConvKernel() = default;
    ConvKernel(std::size_t oc, std::size_t ic, std::size_t k_)
        : out_channels(oc), in_channels(ic), k(k_), v(oc * ic * k_ * k_ * k_, 0.0) {}

    std::size_t size() const { return v.size(); }
    std::size_t index(std::size_t o, std::size_t c, std::size_t z, std::size_t y,
                      std::size_t x) const {
        return (((o * in_channels + c) * k + z) * k + y) * k + x;
    }
    double& at(std::size_t o, std::size_t c, std::size_t z, std::size_t y, std::size_t x) {
        return v[index(o, c, z, y, x)];
    }
    double at(std::size_t o, std::size_t c, std::size_t z, std::size_t y, std::size_t x) const {
        return v[index(o, c, z, y, x)];
    }
};

// Dense row-major matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> v;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, 0.0) {}

    std::size_t size() const { return v.size(); }
    double& at(std::size_t r, std::size_t c) { return v[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
    std::span<double> row(std::size_t r) { return {v.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {v.data() + r * cols, cols}; }
};

// Named view of one parameter tensor's flat storage; optimizers walk these,
// checkpoints serialize them.
struct ParamBlock {
    std::string name;
    double* data = nullptr;
    std::size_t size = 0;
    std::vector<std::size_t> shape;
};

inline double squared_norm(const std::vector<ParamBlock>& blocks) {
    double s = 0.0;
    for (const auto& b : blocks) {
        for (std::size_t i = 0; i < b.size; ++i) s += b.data[i] * b.data[i];
    }
    return s;
}

inline std::size_t total_size(const std::vector<ParamBlock>& blocks) {
    std::size_t n = 0;
    for (const auto& b : blocks) n += b.size;
    return n;
}

}  // namespace hdsi
