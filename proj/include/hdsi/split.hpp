#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "hdsi/observations.hpp"
#include "hdsi/rng.hpp"

namespace hdsi {

struct SplitRatio {
    double r1 = 1.0;
    double r2 = 2.0;
    double r3 = 7.0;

    bool operator==(const SplitRatio&) const = default;
};

// Training / validation / test partition of an observation set. The three
// entry lists are pairwise disjoint and their union is the source set.
struct SplitSet {
    ObservationSet train;
    ObservationSet validation;
    ObservationSet test;
    SplitRatio ratio;
    std::uint64_t seed = 0;
};

// Part sizes by largest-remainder rounding; ties go to the lower part index.
inline std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatio& ratio) {
    const std::array<double, 3> r{ratio.r1, ratio.r2, ratio.r3};
    const double total = r[0] + r[1] + r[2];
    std::array<std::size_t, 3> sizes{};
    std::array<double, 3> frac{};
    std::size_t assigned = 0;
    for (int i = 0; i < 3; ++i) {
        const double quota = static_cast<double>(n) * r[i] / total;
        sizes[i] = static_cast<std::size_t>(std::floor(quota));
        frac[i] = quota - static_cast<double>(sizes[i]);
        assigned += sizes[i];
    }
    for (std::size_t left = n - assigned; left > 0; --left) {
        int best = 0;
        for (int i = 1; i < 3; ++i)
            if (frac[i] > frac[best]) best = i;
        ++sizes[best];
        frac[best] = -1.0;
    }
    return sizes;
}

// Uniform seeded permutation, then contiguous assignment of the three parts.
inline SplitSet split(const ObservationSet& set, const SplitRatio& ratio, std::uint64_t seed) {
    if (ratio.r1 <= 0.0 || ratio.r2 <= 0.0 || ratio.r3 <= 0.0)
        throw ValidationError("split: every ratio component must be positive");
    if (set.entries.size() < 3)
        throw ValidationError("split: need at least 3 entries, got " +
                              std::to_string(set.entries.size()));

    std::vector<std::size_t> order(set.entries.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, "split-permutation"));
    rng.shuffle(order);

    const auto sizes = split_sizes(set.entries.size(), ratio);
    SplitSet out;
    out.ratio = ratio;
    out.seed = seed;
    out.train.dims = out.validation.dims = out.test.dims = set.dims;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < sizes[0]; ++i) out.train.entries.push_back(set.entries[order[pos++]]);
    for (std::size_t i = 0; i < sizes[1]; ++i)
        out.validation.entries.push_back(set.entries[order[pos++]]);
    for (std::size_t i = 0; i < sizes[2]; ++i) out.test.entries.push_back(set.entries[order[pos++]]);
    return out;
}

}  // namespace hdsi
