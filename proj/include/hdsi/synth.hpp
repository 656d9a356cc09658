#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "hdsi/observations.hpp"
#include "hdsi/rng.hpp"

namespace hdsi {

enum class Nonlinearity { none, squash };

inline std::string to_string(Nonlinearity n) {
    return n == Nonlinearity::none ? "none" : "squash";
}

inline Nonlinearity nonlinearity_from_string(const std::string& s) {
    if (s == "none") return Nonlinearity::none;
    if (s == "squash") return Nonlinearity::squash;
    throw ValidationError("unknown nonlinearity '" + s + "'");
}

// Desk-scale synthetic data: a random low-rank core/factor ground truth,
// optionally squashed through tanh, observed on a uniformly sampled fraction
// of cells with Gaussian noise.
struct SynthSpec {
    Dims dims;
    int rank = 3;
    double density = 0.1;
    double noise_stddev = 0.0;
    Nonlinearity nonlinearity = Nonlinearity::none;
    std::uint64_t seed = 1;
};

inline void validate(const SynthSpec& spec) {
    if (spec.dims.stations <= 0 || spec.dims.indicators <= 0 || spec.dims.times <= 0)
        throw ValidationError("synth: dims must be positive");
    if (spec.rank <= 0) throw ValidationError("synth: rank must be positive");
    if (spec.density <= 0.0 || spec.density > 1.0)
        throw ValidationError("synth: density must be in (0, 1]");
    if (spec.noise_stddev < 0.0) throw ValidationError("synth: noise stddev must be nonnegative");
    if (spec.density * static_cast<double>(spec.dims.total()) < 1.0)
        throw ValidationError("synth: density * |S|*|P|*|T| must be at least 1");
}

struct SynthResult {
    ObservationSet observed;
    // Noiseless ground truth for every cell, row-major over (s, p, t).
    std::vector<double> truth;
};

inline SynthResult synthesize_with_truth(const SynthSpec& spec) {
    validate(spec);
    const Dims d = spec.dims;
    const std::size_t total = static_cast<std::size_t>(d.total());
    const std::size_t r = static_cast<std::size_t>(spec.rank);

    // Nonnegative loadings with a signed core give coherent low-rank
    // structure, the regime where sparse completion is well posed.
    Rng factor_rng(derive_seed(spec.seed, "synth-factors"));
    auto draw = [&](std::size_t count, double lo, double hi) {
        std::vector<double> v(count);
        for (double& x : v) x = factor_rng.uniform(lo, hi);
        return v;
    };
    const auto a = draw(static_cast<std::size_t>(d.stations) * r, 0.0, 1.0);
    const auto b = draw(static_cast<std::size_t>(d.indicators) * r, 0.0, 1.0);
    const auto c = draw(static_cast<std::size_t>(d.times) * r, 0.0, 1.0);
    const auto core = draw(r * r * r, -0.5, 0.5);

    SynthResult out;
    out.truth.resize(total);
    std::size_t idx = 0;
    for (int s = 0; s < d.stations; ++s) {
        for (int p = 0; p < d.indicators; ++p) {
            for (int t = 0; t < d.times; ++t) {
                double y = 0.0;
                std::size_t g = 0;
                for (std::size_t n = 0; n < r; ++n) {
                    const double an = a[static_cast<std::size_t>(s) * r + n];
                    for (std::size_t m = 0; m < r; ++m) {
                        const double ab = an * b[static_cast<std::size_t>(p) * r + m];
                        for (std::size_t k = 0; k < r; ++k)
                            y += core[g++] * ab * c[static_cast<std::size_t>(t) * r + k];
                    }
                }
                if (spec.nonlinearity == Nonlinearity::squash) y = std::tanh(y);
                out.truth[idx++] = y;
            }
        }
    }

    // Exact-count sampling: keep the first `count` cells of a partial
    // Fisher-Yates permutation of all cell indices.
    const auto count = static_cast<std::size_t>(
        std::llround(spec.density * static_cast<double>(total)));
    std::vector<std::size_t> cells(total);
    std::iota(cells.begin(), cells.end(), std::size_t{0});
    Rng mask_rng(derive_seed(spec.seed, "synth-mask"));
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(mask_rng.below(total - i));
        std::swap(cells[i], cells[j]);
    }
    cells.resize(count);
    std::sort(cells.begin(), cells.end());

    Rng noise_rng(derive_seed(spec.seed, "synth-noise"));
    out.observed.dims = d;
    out.observed.entries.reserve(count);
    for (std::size_t cell : cells) {
        Observation e;
        e.time = static_cast<int>(cell % static_cast<std::size_t>(d.times));
        const std::size_t sp = cell / static_cast<std::size_t>(d.times);
        e.indicator = static_cast<int>(sp % static_cast<std::size_t>(d.indicators));
        e.station = static_cast<int>(sp / static_cast<std::size_t>(d.indicators));
        e.value = out.truth[cell];
        if (spec.noise_stddev > 0.0) e.value += noise_rng.normal(0.0, spec.noise_stddev);
        out.observed.entries.push_back(e);
    }
    return out;
}

inline ObservationSet synthesize(const SynthSpec& spec) {
    return synthesize_with_truth(spec).observed;
}

}  // namespace hdsi
