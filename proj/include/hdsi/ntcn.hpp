#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "hdsi/observations.hpp"
#include "hdsi/parallel.hpp"
#include "hdsi/rng.hpp"
#include "hdsi/tensor.hpp"
#include "hdsi/tensor_ops.hpp"

namespace hdsi {

// Architecture of the neural Tucker convolutional network: per-mode embedding
// ranks, two 3D conv layers (stride 1, valid padding), one hidden MLP layer,
// sigmoid output head.
struct NtcnConfig {
    int rank_n = 10;  // station embedding dimension
    int rank_m = 10;  // indicator embedding dimension
    int rank_k = 10;  // time embedding dimension
    int c1 = 8;
    int c2 = 16;
    int k1 = 6;
    int k2 = 5;
    int h1 = 32;
    double lambda = 1e-4;
    double init_bound = 0.004;  // embeddings drawn from U(0, init_bound)
    bool conv_bias = true;      // when false, conv biases stay pinned at 0
    double eps = 1e-8;
    std::uint64_t seed = 1;

    void set_rank(int r) { rank_n = rank_m = rank_k = r; }
};

struct NtcnShapes {
    std::array<std::size_t, 3> conv1_out;
    std::array<std::size_t, 3> conv2_out;
    std::size_t c_in;  // flattened length of the second conv output
};

inline NtcnShapes ntcn_shapes(const NtcnConfig& cfg) {
    const std::array<int, 3> ranks{cfg.rank_n, cfg.rank_m, cfg.rank_k};
    if (cfg.c1 <= 0 || cfg.c2 <= 0 || cfg.h1 <= 0)
        throw ValidationError("ntcn: channel and hidden sizes must be positive");
    if (cfg.k1 < 1 || cfg.k2 < 1) throw ValidationError("ntcn: kernel sizes must be >= 1");
    NtcnShapes s{};
    for (int axis = 0; axis < 3; ++axis) {
        if (ranks[axis] < cfg.k1)
            throw ValidationError("ntcn: rank " + std::to_string(ranks[axis]) + " on axis " +
                                  std::to_string(axis) + " is smaller than k1=" +
                                  std::to_string(cfg.k1));
        const auto d1 = static_cast<std::size_t>(ranks[axis] - cfg.k1 + 1);
        if (d1 < static_cast<std::size_t>(cfg.k2))
            throw ValidationError("ntcn: first conv output " + std::to_string(d1) + " on axis " +
                                  std::to_string(axis) + " is smaller than k2=" +
                                  std::to_string(cfg.k2));
        s.conv1_out[axis] = d1;
        s.conv2_out[axis] = d1 - static_cast<std::size_t>(cfg.k2) + 1;
    }
    s.c_in = static_cast<std::size_t>(cfg.c2) * s.conv2_out[0] * s.conv2_out[1] * s.conv2_out[2];
    return s;
}

// All learnable state: three embedding tables, two conv layers, two MLP
// layers.
struct NtcnParams {
    Matrix a;  // |S| x N station embeddings
    Matrix b;  // |P| x M indicator embeddings
    Matrix c;  // |T| x K time embeddings
    ConvKernel w1;
    std::vector<double> bias1;
    ConvKernel w2;
    std::vector<double> bias2;
    Matrix w3;
    std::vector<double> b3;
    std::vector<double> w4;  // 1 x h1, stored flat
    double b_o = 0.0;
    bool train_conv_bias = true;
    double eps = 1e-8;
};

inline std::vector<ParamBlock> param_blocks(NtcnParams& p) {
    return {
        {"A", p.a.v.data(), p.a.size(), {p.a.rows, p.a.cols}},
        {"B", p.b.v.data(), p.b.size(), {p.b.rows, p.b.cols}},
        {"C", p.c.v.data(), p.c.size(), {p.c.rows, p.c.cols}},
        {"W1", p.w1.v.data(), p.w1.size(), {p.w1.out_channels, p.w1.in_channels, p.w1.k, p.w1.k, p.w1.k}},
        {"bias1", p.bias1.data(), p.bias1.size(), {p.bias1.size()}},
        {"W2", p.w2.v.data(), p.w2.size(), {p.w2.out_channels, p.w2.in_channels, p.w2.k, p.w2.k, p.w2.k}},
        {"bias2", p.bias2.data(), p.bias2.size(), {p.bias2.size()}},
        {"W3", p.w3.v.data(), p.w3.size(), {p.w3.rows, p.w3.cols}},
        {"b3", p.b3.data(), p.b3.size(), {p.b3.size()}},
        {"W4", p.w4.data(), p.w4.size(), {std::size_t{1}, p.w4.size()}},
        {"b_o", &p.b_o, 1, {std::size_t{1}}},
    };
}

// Blocks the optimizer may move. Conv biases drop out when pinned.
inline std::vector<ParamBlock> trainable_blocks(NtcnParams& p) {
    auto blocks = param_blocks(p);
    if (!p.train_conv_bias) {
        std::erase_if(blocks, [](const ParamBlock& b) {
            return b.name == "bias1" || b.name == "bias2";
        });
    }
    return blocks;
}

inline double squared_param_norm(NtcnParams& p) { return squared_norm(trainable_blocks(p)); }

// Same shapes, all zeros; used as a gradient accumulator.
inline NtcnParams make_like(const NtcnParams& p) {
    NtcnParams g;
    g.a = Matrix(p.a.rows, p.a.cols);
    g.b = Matrix(p.b.rows, p.b.cols);
    g.c = Matrix(p.c.rows, p.c.cols);
    g.w1 = ConvKernel(p.w1.out_channels, p.w1.in_channels, p.w1.k);
    g.bias1.assign(p.bias1.size(), 0.0);
    g.w2 = ConvKernel(p.w2.out_channels, p.w2.in_channels, p.w2.k);
    g.bias2.assign(p.bias2.size(), 0.0);
    g.w3 = Matrix(p.w3.rows, p.w3.cols);
    g.b3.assign(p.b3.size(), 0.0);
    g.w4.assign(p.w4.size(), 0.0);
    g.b_o = 0.0;
    g.train_conv_bias = p.train_conv_bias;
    g.eps = p.eps;
    return g;
}

inline void zero_params(NtcnParams& g) {
    for (auto& blk : param_blocks(g)) std::fill(blk.data, blk.data + blk.size, 0.0);
}

// Embedding tables from U(0, init_bound); conv and MLP weights fan-balanced
// uniform; biases zero. An all-positive near-zero conv init would collapse
// ReLU diversity, so the embedding law is not reused there.
inline NtcnParams ntcn_init(const NtcnConfig& cfg, const Dims& dims, std::uint64_t seed) {
    const NtcnShapes shapes = ntcn_shapes(cfg);
    if (dims.stations <= 0 || dims.indicators <= 0 || dims.times <= 0)
        throw ValidationError("ntcn: dims must be positive");

    NtcnParams p;
    p.train_conv_bias = cfg.conv_bias;
    p.eps = cfg.eps;
    p.a = Matrix(static_cast<std::size_t>(dims.stations), static_cast<std::size_t>(cfg.rank_n));
    p.b = Matrix(static_cast<std::size_t>(dims.indicators), static_cast<std::size_t>(cfg.rank_m));
    p.c = Matrix(static_cast<std::size_t>(dims.times), static_cast<std::size_t>(cfg.rank_k));
    p.w1 = ConvKernel(static_cast<std::size_t>(cfg.c1), 1, static_cast<std::size_t>(cfg.k1));
    p.bias1.assign(static_cast<std::size_t>(cfg.c1), 0.0);
    p.w2 = ConvKernel(static_cast<std::size_t>(cfg.c2), static_cast<std::size_t>(cfg.c1),
                      static_cast<std::size_t>(cfg.k2));
    p.bias2.assign(static_cast<std::size_t>(cfg.c2), 0.0);
    p.w3 = Matrix(static_cast<std::size_t>(cfg.h1), shapes.c_in);
    p.b3.assign(static_cast<std::size_t>(cfg.h1), 0.0);
    p.w4.assign(static_cast<std::size_t>(cfg.h1), 0.0);
    p.b_o = 0.0;

    Rng emb(derive_seed(seed, "ntcn-embeddings"));
    for (double& v : p.a.v) v = emb.uniform(0.0, cfg.init_bound);
    for (double& v : p.b.v) v = emb.uniform(0.0, cfg.init_bound);
    for (double& v : p.c.v) v = emb.uniform(0.0, cfg.init_bound);

    Rng net(derive_seed(seed, "ntcn-network"));
    auto fan_uniform = [&](std::vector<double>& v, std::size_t fan_in, std::size_t fan_out) {
        const double u = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (double& x : v) x = net.uniform(-u, u);
    };
    const auto k1c = static_cast<std::size_t>(cfg.k1) * cfg.k1 * cfg.k1;
    const auto k2c = static_cast<std::size_t>(cfg.k2) * cfg.k2 * cfg.k2;
    fan_uniform(p.w1.v, k1c, static_cast<std::size_t>(cfg.c1) * k1c);
    fan_uniform(p.w2.v, static_cast<std::size_t>(cfg.c1) * k2c,
                static_cast<std::size_t>(cfg.c2) * k2c);
    fan_uniform(p.w3.v, shapes.c_in, static_cast<std::size_t>(cfg.h1));
    fan_uniform(p.w4, static_cast<std::size_t>(cfg.h1), 1);
    return p;
}

// Every intermediate of one forward pass, retained for the backward pass.
struct ForwardTrace {
    int station = 0, indicator = 0, time = 0;
    DenseTensor3 x;       // outer-product interaction tensor
    DenseTensor3 x_std;   // standardized
    StandardizeStats stats;
    DenseTensor4 h1pre, h1;
    DenseTensor4 h2pre, h2act;
    std::vector<double> h2;  // flattened conv features
    std::vector<double> h3pre, h3;
    double logit = 0.0;
    double yhat = 0.0;
};

inline ForwardTrace ntcn_forward(const NtcnParams& p, int s, int pi, int t) {
    if (s < 0 || static_cast<std::size_t>(s) >= p.a.rows)
        throw ValidationError("ntcn forward: station index " + std::to_string(s) + " out of range");
    if (pi < 0 || static_cast<std::size_t>(pi) >= p.b.rows)
        throw ValidationError("ntcn forward: indicator index " + std::to_string(pi) +
                              " out of range");
    if (t < 0 || static_cast<std::size_t>(t) >= p.c.rows)
        throw ValidationError("ntcn forward: time index " + std::to_string(t) + " out of range");

    ForwardTrace tr;
    tr.station = s;
    tr.indicator = pi;
    tr.time = t;
    tr.x = outer3(p.a.row(static_cast<std::size_t>(s)), p.b.row(static_cast<std::size_t>(pi)),
                  p.c.row(static_cast<std::size_t>(t)));
    auto std_res = standardize(tr.x, p.eps);
    tr.x_std = std::move(std_res.value);
    tr.stats = std_res.stats;

    DenseTensor4 x4(1, tr.x_std.shape[0], tr.x_std.shape[1], tr.x_std.shape[2]);
    x4.v = tr.x_std.v;
    tr.h1pre = conv3d_valid(x4, p.w1, p.bias1);
    tr.h1 = relu(tr.h1pre);
    tr.h2pre = conv3d_valid(tr.h1, p.w2, p.bias2);
    tr.h2act = relu(tr.h2pre);
    tr.h2 = flatten(tr.h2act);
    tr.h3pre = affine(p.w3, tr.h2, p.b3);
    tr.h3 = relu(tr.h3pre);
    double logit = p.b_o;
    for (std::size_t i = 0; i < p.w4.size(); ++i) logit += p.w4[i] * tr.h3[i];
    tr.logit = logit;
    tr.yhat = sigmoid(logit);
    return tr;
}

// Per-sample objective: 0.5*(y - yhat)^2 + lambda * sum of squares over every
// learnable parameter.
inline double ntcn_loss(double yhat, double y, NtcnParams& params, double lambda) {
    const double r = y - yhat;
    return 0.5 * r * r + lambda * squared_param_norm(params);
}

// Adds the exact gradient of the per-sample objective into `grads`. The
// regularization term touches every parameter, not only the three embedding
// rows the sample uses.
inline void ntcn_backward_into(const ForwardTrace& tr, const NtcnParams& p, double y,
                               double lambda, NtcnParams& grads) {
    const double dyhat = tr.yhat - y;
    const double dlogit = sigmoid_backward(tr.yhat, dyhat);

    // output layer
    std::vector<double> dh3(p.w4.size());
    for (std::size_t i = 0; i < p.w4.size(); ++i) {
        grads.w4[i] += dlogit * tr.h3[i];
        dh3[i] = dlogit * p.w4[i];
    }
    grads.b_o += dlogit;

    // hidden MLP layer
    const auto dh3pre = relu_backward(tr.h3pre, dh3);
    auto aff = affine_backward(p.w3, tr.h2, dh3pre);
    for (std::size_t i = 0; i < grads.w3.v.size(); ++i) grads.w3.v[i] += aff.w.v[i];
    for (std::size_t i = 0; i < grads.b3.size(); ++i) grads.b3[i] += aff.b[i];

    // second conv layer
    const DenseTensor4 dh2act = unflatten(aff.x, tr.h2act.shape);
    const DenseTensor4 dh2pre = relu_backward(tr.h2pre, dh2act);
    auto conv2 = conv3d_backward(tr.h1, p.w2, dh2pre);
    for (std::size_t i = 0; i < grads.w2.v.size(); ++i) grads.w2.v[i] += conv2.kernel.v[i];
    if (p.train_conv_bias)
        for (std::size_t i = 0; i < grads.bias2.size(); ++i) grads.bias2[i] += conv2.bias[i];

    // first conv layer
    const DenseTensor4 dh1pre = relu_backward(tr.h1pre, conv2.input);
    DenseTensor4 x4(1, tr.x_std.shape[0], tr.x_std.shape[1], tr.x_std.shape[2]);
    x4.v = tr.x_std.v;
    auto conv1 = conv3d_backward(x4, p.w1, dh1pre);
    for (std::size_t i = 0; i < grads.w1.v.size(); ++i) grads.w1.v[i] += conv1.kernel.v[i];
    if (p.train_conv_bias)
        for (std::size_t i = 0; i < grads.bias1.size(); ++i) grads.bias1[i] += conv1.bias[i];

    // standardization, then the outer product into the three embedding rows
    DenseTensor3 dx_std(tr.x_std.shape[0], tr.x_std.shape[1], tr.x_std.shape[2]);
    dx_std.v = std::move(conv1.input.v);
    const DenseTensor3 dx = standardize_backward(tr.x_std, tr.stats, p.eps, dx_std);
    const auto s = static_cast<std::size_t>(tr.station);
    const auto pi = static_cast<std::size_t>(tr.indicator);
    const auto t = static_cast<std::size_t>(tr.time);
    auto outer = outer3_backward(p.a.row(s), p.b.row(pi), p.c.row(t), dx);
    for (std::size_t i = 0; i < outer.da.size(); ++i) grads.a.at(s, i) += outer.da[i];
    for (std::size_t i = 0; i < outer.db.size(); ++i) grads.b.at(pi, i) += outer.db[i];
    for (std::size_t i = 0; i < outer.dc.size(); ++i) grads.c.at(t, i) += outer.dc[i];

    if (lambda != 0.0) {
        auto pb = trainable_blocks(const_cast<NtcnParams&>(p));
        auto gb = trainable_blocks(grads);
        for (std::size_t k = 0; k < pb.size(); ++k)
            for (std::size_t i = 0; i < pb[k].size; ++i)
                gb[k].data[i] += 2.0 * lambda * pb[k].data[i];
    }
}

inline NtcnParams ntcn_backward(const ForwardTrace& tr, const NtcnParams& p, double y,
                                double lambda) {
    NtcnParams grads = make_like(p);
    ntcn_backward_into(tr, p, y, lambda, grads);
    return grads;
}

// Predicts every cell of the tensor. When `observed` is given, those cells
// keep their observed values instead of the model's estimate. Returned vector
// is row-major over (station, indicator, time).
inline std::vector<double> impute_full(const NtcnParams& p, const Dims& dims,
                                       const ObservationSet* observed = nullptr) {
    if (static_cast<std::size_t>(dims.stations) != p.a.rows ||
        static_cast<std::size_t>(dims.indicators) != p.b.rows ||
        static_cast<std::size_t>(dims.times) != p.c.rows)
        throw ShapeError("impute_full: dims do not match embedding tables");
    const std::size_t total = dims.total();
    std::vector<double> out(total);
    const auto cells_per_station =
        static_cast<std::size_t>(dims.indicators) * static_cast<std::size_t>(dims.times);
    parallel_for(static_cast<std::size_t>(dims.stations), [&](std::size_t begin, std::size_t end) {
        for (std::size_t s = begin; s < end; ++s) {
            std::size_t idx = s * cells_per_station;
            for (int pi = 0; pi < dims.indicators; ++pi)
                for (int t = 0; t < dims.times; ++t)
                    out[idx++] =
                        ntcn_forward(p, static_cast<int>(s), pi, t).yhat;
        }
    });
    if (observed != nullptr) {
        for (const auto& ob : observed->entries)
            out[cell_key(dims, ob.station, ob.indicator, ob.time)] = ob.value;
    }
    return out;
}

// Uniform model facade consumed by the trainer, checkpoints, and gradcheck.
struct NtcnModel {
    Dims dims;
    NtcnConfig config;
    NtcnParams params;

    static constexpr const char* kind() { return "ntcn"; }

    static NtcnModel init(const NtcnConfig& cfg, const Dims& dims, std::uint64_t seed) {
        return NtcnModel{dims, cfg, ntcn_init(cfg, dims, seed)};
    }

    double predict(int s, int p, int t) const { return ntcn_forward(params, s, p, t).yhat; }
    // The sigmoid head already lands in (0, 1); evaluation uses it unchanged.
    double predict_eval(int s, int p, int t) const { return predict(s, p, t); }

    NtcnParams make_grads() const { return make_like(params); }

    double sample_loss(const Observation& ob, double lambda) {
        const auto tr = ntcn_forward(params, ob.station, ob.indicator, ob.time);
        return ntcn_loss(tr.yhat, ob.value, params, lambda);
    }

    double residual_loss_value(const Observation& ob) const {
        const double r = ob.value - predict(ob.station, ob.indicator, ob.time);
        return 0.5 * r * r;
    }

    // Residual half-square for the sample; gradient goes into `grads`.
    double accumulate_sample_grad(const Observation& ob, double lambda, NtcnParams& grads) {
        const auto tr = ntcn_forward(params, ob.station, ob.indicator, ob.time);
        ntcn_backward_into(tr, params, ob.value, lambda, grads);
        const double r = ob.value - tr.yhat;
        return 0.5 * r * r;
    }

    std::vector<ParamBlock> blocks() { return param_blocks(params); }
    std::vector<ParamBlock> trainable() { return trainable_blocks(params); }
    std::vector<ParamBlock> grad_blocks(NtcnParams& g) const { return trainable_blocks(g); }
    double squared_norm_value() { return squared_param_norm(params); }
};

}  // namespace hdsi
