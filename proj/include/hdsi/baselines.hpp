#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "hdsi/observations.hpp"
#include "hdsi/rng.hpp"
#include "hdsi/tensor.hpp"

namespace hdsi {

enum class BaselineLoss { squared, cauchy };

inline std::string to_string(BaselineLoss l) {
    return l == BaselineLoss::squared ? "squared" : "cauchy";
}

inline BaselineLoss baseline_loss_from_string(const std::string& s) {
    if (s == "squared") return BaselineLoss::squared;
    if (s == "cauchy") return BaselineLoss::cauchy;
    throw ValidationError("unknown loss '" + s + "' (expected squared or cauchy)");
}

// d(loss)/d(yhat) for one residual. Cauchy: 0.5*log(1 + (r/gamma)^2).
inline double residual_grad(BaselineLoss loss, double y, double yhat, double gamma) {
    const double r = y - yhat;
    if (loss == BaselineLoss::squared) return -r;
    const double denom = gamma * gamma + r * r;
    return -r / denom;
}

inline double residual_loss(BaselineLoss loss, double y, double yhat, double gamma) {
    const double r = y - yhat;
    if (loss == BaselineLoss::squared) return 0.5 * r * r;
    const double z = r / gamma;
    return 0.5 * std::log1p(z * z);
}

struct TuckerParams {
    DenseTensor3 g;  // N x M x K core
    Matrix a, b, c;
};

struct CpParams {
    Matrix a, b, c;  // shared rank R
};

inline std::vector<ParamBlock> param_blocks(TuckerParams& p) {
    return {
        {"G", p.g.v.data(), p.g.v.size(), {p.g.shape[0], p.g.shape[1], p.g.shape[2]}},
        {"A", p.a.v.data(), p.a.size(), {p.a.rows, p.a.cols}},
        {"B", p.b.v.data(), p.b.size(), {p.b.rows, p.b.cols}},
        {"C", p.c.v.data(), p.c.size(), {p.c.rows, p.c.cols}},
    };
}

inline std::vector<ParamBlock> param_blocks(CpParams& p) {
    return {
        {"A", p.a.v.data(), p.a.size(), {p.a.rows, p.a.cols}},
        {"B", p.b.v.data(), p.b.size(), {p.b.rows, p.b.cols}},
        {"C", p.c.v.data(), p.c.size(), {p.c.rows, p.c.cols}},
    };
}

inline TuckerParams make_like(const TuckerParams& p) {
    TuckerParams g;
    g.g = DenseTensor3(p.g.shape[0], p.g.shape[1], p.g.shape[2]);
    g.a = Matrix(p.a.rows, p.a.cols);
    g.b = Matrix(p.b.rows, p.b.cols);
    g.c = Matrix(p.c.rows, p.c.cols);
    return g;
}

inline CpParams make_like(const CpParams& p) {
    CpParams g;
    g.a = Matrix(p.a.rows, p.a.cols);
    g.b = Matrix(p.b.rows, p.b.cols);
    g.c = Matrix(p.c.rows, p.c.cols);
    return g;
}

inline TuckerParams tucker_init(const Dims& dims, int rank_n, int rank_m, int rank_k,
                                std::uint64_t seed, double init_bound = 0.004) {
    if (rank_n <= 0 || rank_m <= 0 || rank_k <= 0)
        throw ValidationError("tucker: ranks must be positive");
    if (dims.stations <= 0 || dims.indicators <= 0 || dims.times <= 0)
        throw ValidationError("tucker: dims must be positive");
    TuckerParams p;
    p.g = DenseTensor3(static_cast<std::size_t>(rank_n), static_cast<std::size_t>(rank_m),
                       static_cast<std::size_t>(rank_k));
    p.a = Matrix(static_cast<std::size_t>(dims.stations), static_cast<std::size_t>(rank_n));
    p.b = Matrix(static_cast<std::size_t>(dims.indicators), static_cast<std::size_t>(rank_m));
    p.c = Matrix(static_cast<std::size_t>(dims.times), static_cast<std::size_t>(rank_k));
    Rng rng(derive_seed(seed, "tucker-init"));
    for (double& v : p.a.v) v = rng.uniform(0.0, init_bound);
    for (double& v : p.b.v) v = rng.uniform(0.0, init_bound);
    for (double& v : p.c.v) v = rng.uniform(0.0, init_bound);
    for (double& v : p.g.v) v = rng.uniform(0.0, init_bound);
    return p;
}

inline CpParams cp_init(const Dims& dims, int rank, std::uint64_t seed,
                        double init_bound = 0.004) {
    if (rank <= 0) throw ValidationError("cp: rank must be positive");
    if (dims.stations <= 0 || dims.indicators <= 0 || dims.times <= 0)
        throw ValidationError("cp: dims must be positive");
    CpParams p;
    p.a = Matrix(static_cast<std::size_t>(dims.stations), static_cast<std::size_t>(rank));
    p.b = Matrix(static_cast<std::size_t>(dims.indicators), static_cast<std::size_t>(rank));
    p.c = Matrix(static_cast<std::size_t>(dims.times), static_cast<std::size_t>(rank));
    Rng rng(derive_seed(seed, "cp-init"));
    for (double& v : p.a.v) v = rng.uniform(0.0, init_bound);
    for (double& v : p.b.v) v = rng.uniform(0.0, init_bound);
    for (double& v : p.c.v) v = rng.uniform(0.0, init_bound);
    return p;
}

// yhat = sum_{n,m,k} g[n,m,k] a[s,n] b[p,m] c[t,k]
inline double tucker_predict(const TuckerParams& p, int s, int pi, int t) {
    const auto as = p.a.row(static_cast<std::size_t>(s));
    const auto bp = p.b.row(static_cast<std::size_t>(pi));
    const auto ct = p.c.row(static_cast<std::size_t>(t));
    double acc = 0.0;
    std::size_t idx = 0;
    for (std::size_t n = 0; n < p.g.shape[0]; ++n) {
        double inner_nm = 0.0;
        for (std::size_t m = 0; m < p.g.shape[1]; ++m) {
            double inner_k = 0.0;
            for (std::size_t k = 0; k < p.g.shape[2]; ++k) inner_k += p.g.v[idx++] * ct[k];
            inner_nm += bp[m] * inner_k;
        }
        acc += as[n] * inner_nm;
    }
    return acc;
}

// yhat = sum_r a[s,r] b[p,r] c[t,r]
inline double cp_predict(const CpParams& p, int s, int pi, int t) {
    const auto as = p.a.row(static_cast<std::size_t>(s));
    const auto bp = p.b.row(static_cast<std::size_t>(pi));
    const auto ct = p.c.row(static_cast<std::size_t>(t));
    double acc = 0.0;
    for (std::size_t r = 0; r < as.size(); ++r) acc += as[r] * bp[r] * ct[r];
    return acc;
}

// Per-sample gradient of residual loss + lambda * (norms of the touched rows
// and the core). Only the rows a_s, b_p, c_t and the core receive updates.
inline double tucker_accumulate_grad(const TuckerParams& p, const Observation& ob,
                                     BaselineLoss loss, double gamma, double lambda,
                                     TuckerParams& grads) {
    const auto s = static_cast<std::size_t>(ob.station);
    const auto pi = static_cast<std::size_t>(ob.indicator);
    const auto t = static_cast<std::size_t>(ob.time);
    const double yhat = tucker_predict(p, ob.station, ob.indicator, ob.time);
    const double up = residual_grad(loss, ob.value, yhat, gamma);

    const auto as = p.a.row(s);
    const auto bp = p.b.row(pi);
    const auto ct = p.c.row(t);
    std::size_t idx = 0;
    for (std::size_t n = 0; n < p.g.shape[0]; ++n) {
        for (std::size_t m = 0; m < p.g.shape[1]; ++m) {
            const double ab = as[n] * bp[m];
            for (std::size_t k = 0; k < p.g.shape[2]; ++k) {
                const double gv = p.g.v[idx];
                grads.g.v[idx] += up * ab * ct[k];
                grads.a.at(s, n) += up * gv * bp[m] * ct[k];
                grads.b.at(pi, m) += up * gv * as[n] * ct[k];
                grads.c.at(t, k) += up * gv * ab;
                ++idx;
            }
        }
    }
    if (lambda != 0.0) {
        for (std::size_t n = 0; n < as.size(); ++n) grads.a.at(s, n) += 2.0 * lambda * as[n];
        for (std::size_t m = 0; m < bp.size(); ++m) grads.b.at(pi, m) += 2.0 * lambda * bp[m];
        for (std::size_t k = 0; k < ct.size(); ++k) grads.c.at(t, k) += 2.0 * lambda * ct[k];
        for (std::size_t i = 0; i < p.g.v.size(); ++i) grads.g.v[i] += 2.0 * lambda * p.g.v[i];
    }
    return residual_loss(loss, ob.value, yhat, gamma);
}

inline double cp_accumulate_grad(const CpParams& p, const Observation& ob, BaselineLoss loss,
                                 double gamma, double lambda, CpParams& grads) {
    const auto s = static_cast<std::size_t>(ob.station);
    const auto pi = static_cast<std::size_t>(ob.indicator);
    const auto t = static_cast<std::size_t>(ob.time);
    const double yhat = cp_predict(p, ob.station, ob.indicator, ob.time);
    const double up = residual_grad(loss, ob.value, yhat, gamma);

    const auto as = p.a.row(s);
    const auto bp = p.b.row(pi);
    const auto ct = p.c.row(t);
    for (std::size_t r = 0; r < as.size(); ++r) {
        grads.a.at(s, r) += up * bp[r] * ct[r] + 2.0 * lambda * as[r];
        grads.b.at(pi, r) += up * as[r] * ct[r] + 2.0 * lambda * bp[r];
        grads.c.at(t, r) += up * as[r] * bp[r] + 2.0 * lambda * ct[r];
    }
    return residual_loss(loss, ob.value, yhat, gamma);
}

inline double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

struct TuckerModel {
    Dims dims;
    int rank_n = 10, rank_m = 10, rank_k = 10;
    BaselineLoss loss = BaselineLoss::squared;
    double gamma = 1.0;
    TuckerParams params;

    static constexpr const char* kind() { return "tucker"; }

    static TuckerModel init(const Dims& dims, int rank, std::uint64_t seed,
                            BaselineLoss loss = BaselineLoss::squared, double gamma = 1.0,
                            double init_bound = 0.004) {
        if (loss == BaselineLoss::cauchy && !(gamma > 0.0))
            throw ValidationError("cauchy loss requires gamma > 0");
        return TuckerModel{dims, rank, rank, rank, loss, gamma,
                           tucker_init(dims, rank, rank, rank, seed, init_bound)};
    }

    double predict(int s, int p, int t) const { return tucker_predict(params, s, p, t); }
    // Raw multilinear output can leave [0, 1]; evaluation clamps, training
    // does not.
    double predict_eval(int s, int p, int t) const { return clamp01(predict(s, p, t)); }

    TuckerParams make_grads() const { return make_like(params); }

    double sample_loss(const Observation& ob, double lambda) {
        const double yhat = predict(ob.station, ob.indicator, ob.time);
        double reg = 0.0;
        const auto as = params.a.row(static_cast<std::size_t>(ob.station));
        const auto bp = params.b.row(static_cast<std::size_t>(ob.indicator));
        const auto ct = params.c.row(static_cast<std::size_t>(ob.time));
        for (double v : as) reg += v * v;
        for (double v : bp) reg += v * v;
        for (double v : ct) reg += v * v;
        for (double v : params.g.v) reg += v * v;
        return residual_loss(loss, ob.value, yhat, gamma) + lambda * reg;
    }

    double accumulate_sample_grad(const Observation& ob, double lambda, TuckerParams& grads) {
        return tucker_accumulate_grad(params, ob, loss, gamma, lambda, grads);
    }

    double residual_loss_value(const Observation& ob) const {
        return residual_loss(loss, ob.value, predict(ob.station, ob.indicator, ob.time), gamma);
    }

    std::vector<ParamBlock> blocks() { return param_blocks(params); }
    std::vector<ParamBlock> trainable() { return param_blocks(params); }
    std::vector<ParamBlock> grad_blocks(TuckerParams& g) const { return param_blocks(g); }
    double squared_norm_value() {
        auto b = param_blocks(params);
        return squared_norm(b);
    }
};

struct CpModel {
    Dims dims;
    int rank = 10;
    BaselineLoss loss = BaselineLoss::squared;
    double gamma = 1.0;
    CpParams params;

    static constexpr const char* kind() { return "cp"; }

    static CpModel init(const Dims& dims, int rank, std::uint64_t seed,
                        BaselineLoss loss = BaselineLoss::squared, double gamma = 1.0,
                        double init_bound = 0.004) {
        if (loss == BaselineLoss::cauchy && !(gamma > 0.0))
            throw ValidationError("cauchy loss requires gamma > 0");
        return CpModel{dims, rank, loss, gamma, cp_init(dims, rank, seed, init_bound)};
    }

    double predict(int s, int p, int t) const { return cp_predict(params, s, p, t); }
    double predict_eval(int s, int p, int t) const { return clamp01(predict(s, p, t)); }

    CpParams make_grads() const { return make_like(params); }

    double sample_loss(const Observation& ob, double lambda) {
        const double yhat = predict(ob.station, ob.indicator, ob.time);
        double reg = 0.0;
        const auto as = params.a.row(static_cast<std::size_t>(ob.station));
        const auto bp = params.b.row(static_cast<std::size_t>(ob.indicator));
        const auto ct = params.c.row(static_cast<std::size_t>(ob.time));
        for (double v : as) reg += v * v;
        for (double v : bp) reg += v * v;
        for (double v : ct) reg += v * v;
        return residual_loss(loss, ob.value, yhat, gamma) + lambda * reg;
    }

    double accumulate_sample_grad(const Observation& ob, double lambda, CpParams& grads) {
        return cp_accumulate_grad(params, ob, loss, gamma, lambda, grads);
    }

    double residual_loss_value(const Observation& ob) const {
        return residual_loss(loss, ob.value, predict(ob.station, ob.indicator, ob.time), gamma);
    }

    std::vector<ParamBlock> blocks() { return param_blocks(params); }
    std::vector<ParamBlock> trainable() { return param_blocks(params); }
    std::vector<ParamBlock> grad_blocks(CpParams& g) const { return param_blocks(g); }
    double squared_norm_value() {
        auto b = param_blocks(params);
        return squared_norm(b);
    }
};

}  // namespace hdsi
