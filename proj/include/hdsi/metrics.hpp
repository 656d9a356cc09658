#pragma once

#include <cmath>
#include <string>

#include "hdsi/observations.hpp"

namespace hdsi {

// Accuracy on one observation subset. `scale` records which preprocessing the
// values live in, so reports from different pipelines are not comparable by
// accident.
struct EvalReport {
    double rmse = 0.0;
    double mae = 0.0;
    std::size_t count = 0;
    std::string scale;

    bool operator==(const EvalReport&) const = default;
};

// predict(s, p, t) -> value in the same scale as set.entries[i].value.
template <typename Predict>
EvalReport evaluate(Predict&& predict, const ObservationSet& set, std::string scale = "") {
    if (set.entries.empty()) throw ValidationError("evaluate: observation set is empty");
    double abs_sum = 0.0;
    double sq_sum = 0.0;
    for (const auto& ob : set.entries) {
        const double r = ob.value - predict(ob.station, ob.indicator, ob.time);
        abs_sum += std::abs(r);
        sq_sum += r * r;
    }
    const auto n = static_cast<double>(set.entries.size());
    EvalReport rep;
    rep.mae = abs_sum / n;
    rep.rmse = std::sqrt(sq_sum / n);
    rep.count = set.entries.size();
    rep.scale = std::move(scale);
    return rep;
}

template <typename Model>
EvalReport evaluate_model(const Model& model, const ObservationSet& set, std::string scale = "") {
    return evaluate([&](int s, int p, int t) { return model.predict_eval(s, p, t); }, set,
                    std::move(scale));
}

}  // namespace hdsi
