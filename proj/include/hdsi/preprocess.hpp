#pragma once

#include <algorithm>
#include <string>

#include "hdsi/observations.hpp"
#include "hdsi/tensor_ops.hpp"

namespace hdsi {

enum class PreprocessKind { sigmoid, minmax };

inline std::string to_string(PreprocessKind k) {
    return k == PreprocessKind::sigmoid ? "sigmoid" : "minmax";
}

inline PreprocessKind preprocess_from_string(const std::string& s) {
    if (s == "sigmoid") return PreprocessKind::sigmoid;
    if (s == "minmax") return PreprocessKind::minmax;
    throw ValidationError("unknown preprocess mode '" + s + "'");
}

// Maps every value through the logistic function; indices untouched.
inline ObservationSet preprocess_sigmoid(ObservationSet set) {
    for (auto& e : set.entries) e.value = sigmoid(e.value);
    return set;
}

// Retains what is needed to invert a min-max rescale. `degenerate` flags a
// constant input (max == min), where every value maps to 0.
struct ScaleRecord {
    double min = 0.0;
    double max = 1.0;
    bool degenerate = false;

    double apply(double y) const { return degenerate ? 0.0 : (y - min) / (max - min); }
    double invert(double y_scaled) const {
        return degenerate ? min : min + y_scaled * (max - min);
    }
};

struct MinMaxResult {
    ObservationSet set;
    ScaleRecord scale;
};

inline MinMaxResult preprocess_minmax(ObservationSet set) {
    if (set.entries.empty()) throw ValidationError("minmax: empty observation set");
    double lo = set.entries.front().value;
    double hi = lo;
    for (const auto& e : set.entries) {
        lo = std::min(lo, e.value);
        hi = std::max(hi, e.value);
    }
    ScaleRecord rec{lo, hi, hi == lo};
    for (auto& e : set.entries) e.value = rec.apply(e.value);
    return {std::move(set), rec};
}

}  // namespace hdsi
