#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "hdsi/error.hpp"
#include "hdsi/tensor.hpp"

namespace hdsi {

// ---------------------------------------------------------------------------
// Outer product of three vectors: element (n,m,k) = a[n]*b[m]*c[k].

inline DenseTensor3 outer3(std::span<const double> a, std::span<const double> b,
                           std::span<const double> c) {
    if (a.empty() || b.empty() || c.empty()) throw ShapeError("outer3: empty input vector");
    DenseTensor3 out(a.size(), b.size(), c.size());
    std::size_t idx = 0;
    for (double an : a) {
        for (double bm : b) {
            const double ab = an * bm;
            for (double ck : c) out.v[idx++] = ab * ck;
        }
    }
    return out;
}

struct Outer3Grads {
    std::vector<double> da, db, dc;
};

inline Outer3Grads outer3_backward(std::span<const double> a, std::span<const double> b,
                                   std::span<const double> c, const DenseTensor3& upstream) {
    Outer3Grads g{std::vector<double>(a.size(), 0.0), std::vector<double>(b.size(), 0.0),
                  std::vector<double>(c.size(), 0.0)};
    std::size_t idx = 0;
    for (std::size_t n = 0; n < a.size(); ++n) {
        for (std::size_t m = 0; m < b.size(); ++m) {
            const double ab = a[n] * b[m];
            for (std::size_t k = 0; k < c.size(); ++k) {
                const double u = upstream.v[idx++];
                g.da[n] += u * b[m] * c[k];
                g.db[m] += u * a[n] * c[k];
                g.dc[k] += u * ab;
            }
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// Per-sample standardization: x' = (x - mean) / (std + eps), population std.

struct StandardizeStats {
    double mean = 0.0;
    double stddev = 0.0;
};

struct StandardizeResult {
    DenseTensor3 value;
    StandardizeStats stats;
};

inline StandardizeResult standardize(const DenseTensor3& x, double eps) {
    const std::size_t n = x.size();
    double mean = 0.0;
    for (double v : x.v) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : x.v) {
        const double d = v - mean;
        var += d * d;
    }
    var /= static_cast<double>(n);
    const double sd = std::sqrt(var);
    StandardizeResult r{x, {mean, sd}};
    const double denom = sd + eps;
    for (double& v : r.value.v) v = (v - mean) / denom;
    return r;
}

// Gradient of the loss w.r.t. the raw x, given the gradient w.r.t. x'.
// Both mean and std depend on every element:
//   dx_i = (g_i - mean(g)) / (sd + eps) - x'_i * mean(g .* x') / sd
// The second term vanishes for a constant tensor (x' is all zeros there).
inline DenseTensor3 standardize_backward(const DenseTensor3& x_std, const StandardizeStats& stats,
                                         double eps, const DenseTensor3& upstream) {
    const std::size_t n = x_std.size();
    const double denom = stats.stddev + eps;
    double g_mean = 0.0;
    double gx_mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        g_mean += upstream.v[i];
        gx_mean += upstream.v[i] * x_std.v[i];
    }
    g_mean /= static_cast<double>(n);
    gx_mean /= static_cast<double>(n);

    DenseTensor3 grad(x_std.shape[0], x_std.shape[1], x_std.shape[2]);
    for (std::size_t i = 0; i < n; ++i) {
        double d = (upstream.v[i] - g_mean) / denom;
        if (stats.stddev > 0.0) d -= x_std.v[i] * gx_mean / stats.stddev;
        grad.v[i] = d;
    }
    return grad;
}

// ---------------------------------------------------------------------------
// Valid 3D convolution, cross-correlation semantics (no kernel flip),
// one scalar bias per output channel.

inline void check_conv_shapes(const DenseTensor4& input, const ConvKernel& kernel,
                              std::size_t stride) {
    if (stride == 0) throw ShapeError("conv3d: stride must be positive");
    if (kernel.in_channels != input.channels())
        throw ShapeError("conv3d: kernel expects " + std::to_string(kernel.in_channels) +
                         " input channels, got " + std::to_string(input.channels()));
    for (int axis = 0; axis < 3; ++axis) {
        const std::size_t d = input.shape[static_cast<std::size_t>(axis) + 1];
        if (d < kernel.k)
            throw ShapeError("conv3d: spatial axis " + std::to_string(axis) + " has extent " +
                             std::to_string(d) + " < kernel size " + std::to_string(kernel.k));
        if ((d - kernel.k) % stride != 0)
            throw ShapeError("conv3d: spatial axis " + std::to_string(axis) + " extent " +
                             std::to_string(d) + " minus kernel " + std::to_string(kernel.k) +
                             " is not divisible by stride " + std::to_string(stride));
    }
}

inline std::array<std::size_t, 3> conv_output_dims(const DenseTensor4& input,
                                                   const ConvKernel& kernel, std::size_t stride) {
    return {(input.shape[1] - kernel.k) / stride + 1, (input.shape[2] - kernel.k) / stride + 1,
            (input.shape[3] - kernel.k) / stride + 1};
}

inline DenseTensor4 conv3d_valid(const DenseTensor4& input, const ConvKernel& kernel,
                                 std::span<const double> bias, std::size_t stride = 1) {
    check_conv_shapes(input, kernel, stride);
    if (!bias.empty() && bias.size() != kernel.out_channels)
        throw ShapeError("conv3d: bias size " + std::to_string(bias.size()) +
                         " != out channels " + std::to_string(kernel.out_channels));
    const auto od = conv_output_dims(input, kernel, stride);
    DenseTensor4 out(kernel.out_channels, od[0], od[1], od[2]);
    const std::size_t kk = kernel.k;
    for (std::size_t o = 0; o < kernel.out_channels; ++o) {
        const double b = bias.empty() ? 0.0 : bias[o];
        for (std::size_t z = 0; z < od[0]; ++z) {
            for (std::size_t y = 0; y < od[1]; ++y) {
                for (std::size_t x = 0; x < od[2]; ++x) {
                    double acc = b;
                    for (std::size_t c = 0; c < kernel.in_channels; ++c) {
                        for (std::size_t dz = 0; dz < kk; ++dz) {
                            for (std::size_t dy = 0; dy < kk; ++dy) {
                                const std::size_t in_base =
                                    input.index(c, z * stride + dz, y * stride + dy, x * stride);
                                const std::size_t k_base = kernel.index(o, c, dz, dy, 0);
                                for (std::size_t dx = 0; dx < kk; ++dx)
                                    acc += input.v[in_base + dx] * kernel.v[k_base + dx];
                            }
                        }
                    }
                    out.at(o, z, y, x) = acc;
                }
            }
        }
    }
    return out;
}

struct Conv3dGrads {
    DenseTensor4 input;
    ConvKernel kernel;
    std::vector<double> bias;
};

// Exact adjoint of conv3d_valid.
inline Conv3dGrads conv3d_backward(const DenseTensor4& input, const ConvKernel& kernel,
                                   const DenseTensor4& upstream, std::size_t stride = 1) {
    check_conv_shapes(input, kernel, stride);
    const auto od = conv_output_dims(input, kernel, stride);
    if (upstream.shape != std::array<std::size_t, 4>{kernel.out_channels, od[0], od[1], od[2]})
        throw ShapeError("conv3d_backward: upstream shape does not match forward output");

    Conv3dGrads g{DenseTensor4(input.shape[0], input.shape[1], input.shape[2], input.shape[3]),
                  ConvKernel(kernel.out_channels, kernel.in_channels, kernel.k),
                  std::vector<double>(kernel.out_channels, 0.0)};
    const std::size_t kk = kernel.k;
    for (std::size_t o = 0; o < kernel.out_channels; ++o) {
        for (std::size_t z = 0; z < od[0]; ++z) {
            for (std::size_t y = 0; y < od[1]; ++y) {
                for (std::size_t x = 0; x < od[2]; ++x) {
                    const double u = upstream.at(o, z, y, x);
                    if (u == 0.0) continue;
                    g.bias[o] += u;
                    for (std::size_t c = 0; c < kernel.in_channels; ++c) {
                        for (std::size_t dz = 0; dz < kk; ++dz) {
                            for (std::size_t dy = 0; dy < kk; ++dy) {
                                const std::size_t in_base =
                                    input.index(c, z * stride + dz, y * stride + dy, x * stride);
                                const std::size_t k_base = kernel.index(o, c, dz, dy, 0);
                                for (std::size_t dx = 0; dx < kk; ++dx) {
                                    g.kernel.v[k_base + dx] += u * input.v[in_base + dx];
                                    g.input.v[in_base + dx] += u * kernel.v[k_base + dx];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// ReLU, elementwise. Subgradient at 0 is 0.

inline std::vector<double> relu(std::vector<double> x) {
    for (double& v : x)
        if (v < 0.0) v = 0.0;
    return x;
}

inline DenseTensor4 relu(DenseTensor4 x) {
    for (double& v : x.v)
        if (v < 0.0) v = 0.0;
    return x;
}

inline std::vector<double> relu_backward(std::span<const double> pre,
                                         std::span<const double> upstream) {
    std::vector<double> g(pre.size(), 0.0);
    for (std::size_t i = 0; i < pre.size(); ++i)
        if (pre[i] > 0.0) g[i] = upstream[i];
    return g;
}

inline DenseTensor4 relu_backward(const DenseTensor4& pre, const DenseTensor4& upstream) {
    DenseTensor4 g(pre.shape[0], pre.shape[1], pre.shape[2], pre.shape[3]);
    for (std::size_t i = 0; i < pre.v.size(); ++i)
        if (pre.v[i] > 0.0) g.v[i] = upstream.v[i];
    return g;
}

// ---------------------------------------------------------------------------
// Affine map y = Wx + b.

inline std::vector<double> affine(const Matrix& w, std::span<const double> x,
                                  std::span<const double> b) {
    if (w.cols != x.size())
        throw ShapeError("affine: matrix has " + std::to_string(w.cols) + " columns, vector has " +
                         std::to_string(x.size()) + " elements");
    if (b.size() != w.rows)
        throw ShapeError("affine: bias size " + std::to_string(b.size()) + " != rows " +
                         std::to_string(w.rows));
    std::vector<double> y(w.rows);
    for (std::size_t r = 0; r < w.rows; ++r) {
        double acc = b[r];
        const double* wr = w.v.data() + r * w.cols;
        for (std::size_t c = 0; c < w.cols; ++c) acc += wr[c] * x[c];
        y[r] = acc;
    }
    return y;
}

struct AffineGrads {
    std::vector<double> x;
    Matrix w;
    std::vector<double> b;
};

inline AffineGrads affine_backward(const Matrix& w, std::span<const double> x,
                                   std::span<const double> upstream) {
    if (upstream.size() != w.rows) throw ShapeError("affine_backward: upstream size != rows");
    AffineGrads g{std::vector<double>(w.cols, 0.0), Matrix(w.rows, w.cols),
                  std::vector<double>(upstream.begin(), upstream.end())};
    for (std::size_t r = 0; r < w.rows; ++r) {
        const double u = upstream[r];
        const double* wr = w.v.data() + r * w.cols;
        double* gw = g.w.v.data() + r * w.cols;
        for (std::size_t c = 0; c < w.cols; ++c) {
            gw[c] = u * x[c];
            g.x[c] += u * wr[c];
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// Scalar sigmoid. Output strictly inside (0,1) for finite input.

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double sigmoid_backward(double y, double upstream) { return upstream * y * (1.0 - y); }

// ---------------------------------------------------------------------------
// Row-major flatten; the backward is a plain reshape.

inline std::vector<double> flatten(const DenseTensor4& x) { return x.v; }

inline DenseTensor4 unflatten(std::span<const double> x, const std::array<std::size_t, 4>& shape) {
    DenseTensor4 t(shape[0], shape[1], shape[2], shape[3]);
    if (x.size() != t.size()) throw ShapeError("unflatten: element count does not match shape");
    std::copy(x.begin(), x.end(), t.v.begin());
    return t;
}

}  // namespace hdsi
