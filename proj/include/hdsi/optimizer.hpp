#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "hdsi/error.hpp"
#include "hdsi/tensor.hpp"

namespace hdsi {

enum class OptimizerKind { sgd, adam };

inline std::string to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

inline OptimizerKind optimizer_from_string(const std::string& s) {
    if (s == "sgd") return OptimizerKind::sgd;
    if (s == "adam") return OptimizerKind::adam;
    throw ValidationError("unknown optimizer '" + s + "' (expected sgd or adam)");
}

namespace detail {
inline void check_aligned(const std::vector<ParamBlock>& params,
                          const std::vector<ParamBlock>& grads) {
    if (params.size() != grads.size())
        throw ShapeError("optimizer: parameter and gradient block counts differ");
    for (std::size_t i = 0; i < params.size(); ++i)
        if (params[i].size != grads[i].size)
            throw ShapeError("optimizer: block '" + params[i].name + "' size mismatch");
}
}  // namespace detail

inline void sgd_step(std::vector<ParamBlock>& params, const std::vector<ParamBlock>& grads,
                     double lr) {
    detail::check_aligned(params, grads);
    for (std::size_t b = 0; b < params.size(); ++b)
        for (std::size_t i = 0; i < params[b].size; ++i)
            params[b].data[i] -= lr * grads[b].data[i];
}

// First and second moment accumulators, flat across all blocks in order.
struct AdamState {
    std::uint64_t step = 0;
    std::vector<double> m;
    std::vector<double> v;

    static AdamState for_blocks(const std::vector<ParamBlock>& blocks) {
        AdamState st;
        st.m.assign(total_size(blocks), 0.0);
        st.v.assign(total_size(blocks), 0.0);
        return st;
    }
};

inline void adam_step(std::vector<ParamBlock>& params, const std::vector<ParamBlock>& grads,
                      AdamState& state, double lr, double beta1 = 0.9, double beta2 = 0.999,
                      double eps = 1e-8) {
    detail::check_aligned(params, grads);
    if (state.m.size() != total_size(params))
        throw ShapeError("adam: state size does not match parameter count");
    ++state.step;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    std::size_t off = 0;
    for (std::size_t b = 0; b < params.size(); ++b) {
        for (std::size_t i = 0; i < params[b].size; ++i, ++off) {
            const double g = grads[b].data[i];
            state.m[off] = beta1 * state.m[off] + (1.0 - beta1) * g;
            state.v[off] = beta2 * state.v[off] + (1.0 - beta2) * g * g;
            const double mhat = state.m[off] / bc1;
            const double vhat = state.v[off] / bc2;
            params[b].data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

}  // namespace hdsi
