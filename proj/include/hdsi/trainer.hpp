#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "hdsi/error.hpp"
#include "hdsi/metrics.hpp"
#include "hdsi/observations.hpp"
#include "hdsi/optimizer.hpp"
#include "hdsi/rng.hpp"
#include "hdsi/split.hpp"

namespace hdsi {

struct TrainConfig {
    OptimizerKind optimizer = OptimizerKind::sgd;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    int batch_size = 1;
    int max_epochs = 1000;
    // Stop when |E_t - E_{t-1}| drops below this; <= 0 disables the check.
    double early_stop_tol = 1e-5;
    double lambda = 1e-4;
    std::uint64_t seed = 1;
    bool snapshot_best_validation = true;
    // Keeps emitted logs free of wall-clock noise so run digests compare
    // equal; the optimization itself is deterministic either way.
    bool deterministic = true;
    double divergence_threshold = 1e12;
};

inline void validate(const TrainConfig& cfg) {
    if (!(cfg.lr > 0.0)) throw ValidationError("train: learning rate must be positive");
    if (cfg.batch_size < 1) throw ValidationError("train: batch size must be >= 1");
    if (cfg.max_epochs < 1) throw ValidationError("train: max epochs must be >= 1");
    if (cfg.lambda < 0.0) throw ValidationError("train: lambda must be non-negative");
    if (!(cfg.divergence_threshold > 0.0))
        throw ValidationError("train: divergence threshold must be positive");
}

struct EpochRecord {
    int epoch = 0;  // 1-based
    double objective = 0.0;
    double data_loss = 0.0;
    double validation_rmse = std::numeric_limits<double>::quiet_NaN();
    double validation_mae = std::numeric_limits<double>::quiet_NaN();
    double duration_ms = 0.0;
};

struct TrainLog {
    std::vector<EpochRecord> epochs;
    std::string stop_reason;  // "early-stop" or "max-epochs"
    int epochs_run = 0;
    double final_objective = 0.0;
    double best_validation_rmse = std::numeric_limits<double>::quiet_NaN();
    int best_epoch = 0;  // 0 when no validation epochs happened
};

// Stops once consecutive objectives differ by less than tol. Needs two
// observations before it can ever fire.
class EarlyStopMonitor {
public:
    explicit EarlyStopMonitor(double tol) : tol_(tol) {}

    bool update(double objective) {
        const bool stop =
            tol_ > 0.0 && has_prev_ && std::isfinite(objective) && std::isfinite(prev_) &&
            std::abs(objective - prev_) < tol_;
        prev_ = objective;
        has_prev_ = true;
        return stop;
    }

private:
    double tol_;
    bool has_prev_ = false;
    double prev_ = 0.0;
};

// Objective in the monitored form: summed residual loss over the set plus one
// global regularization term. Recomputed with post-step parameters, so the
// early-stop trace matches what a fresh evaluation would see.
template <typename Model>
double training_objective(Model& model, const ObservationSet& train_set, double lambda) {
    double total = 0.0;
    for (const auto& ob : train_set.entries) total += model.residual_loss_value(ob);
    return total + lambda * model.squared_norm_value();
}

// Mini-batch gradient descent over the observed entries. batch_size 1
// reproduces plain per-sample stochastic updates; larger batches average the
// per-sample gradients. `validation` may be null or empty; then no snapshot
// tracking happens.
template <typename Model>
TrainLog train(Model& model, const ObservationSet& train_set, const ObservationSet* validation,
               const TrainConfig& cfg) {
    validate(cfg);
    if (train_set.entries.empty()) throw ValidationError("train: training set is empty");

    const bool has_validation = validation != nullptr && !validation->entries.empty();
    std::vector<std::size_t> order(train_set.entries.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng order_rng(derive_seed(cfg.seed, "train-order"));

    auto grads = model.make_grads();
    AdamState adam;
    if (cfg.optimizer == OptimizerKind::adam) adam = AdamState::for_blocks(model.trainable());

    TrainLog log;
    log.stop_reason = "max-epochs";
    EarlyStopMonitor monitor(cfg.early_stop_tol);
    auto best_params = model.params;
    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = 0;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        order_rng.shuffle(order);

        const auto bs = static_cast<std::size_t>(cfg.batch_size);
        for (std::size_t start = 0; start < order.size(); start += bs) {
            const std::size_t end = std::min(order.size(), start + bs);
            auto gb = model.grad_blocks(grads);
            for (auto& blk : gb) std::fill(blk.data, blk.data + blk.size, 0.0);
            for (std::size_t i = start; i < end; ++i)
                model.accumulate_sample_grad(train_set.entries[order[i]], cfg.lambda, grads);
            if (end - start > 1) {
                const double inv = 1.0 / static_cast<double>(end - start);
                for (auto& blk : gb)
                    for (std::size_t i = 0; i < blk.size; ++i) blk.data[i] *= inv;
            }
            auto pb = model.trainable();
            if (cfg.optimizer == OptimizerKind::sgd)
                sgd_step(pb, gb, cfg.lr);
            else
                adam_step(pb, gb, adam, cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.objective = training_objective(model, train_set, cfg.lambda);
        rec.data_loss = rec.objective - cfg.lambda * model.squared_norm_value();
        if (!std::isfinite(rec.objective) || rec.objective > cfg.divergence_threshold)
            throw DivergenceError("training diverged: objective " +
                                      std::to_string(rec.objective) + " at epoch " +
                                      std::to_string(epoch),
                                  epoch);

        if (has_validation) {
            const EvalReport val = evaluate_model(model, *validation);
            rec.validation_rmse = val.rmse;
            rec.validation_mae = val.mae;
            if (rec.validation_rmse < best_val) {
                best_val = rec.validation_rmse;
                best_epoch = epoch;
                best_params = model.params;
            }
        }

        if (!cfg.deterministic)
            rec.duration_ms = std::chrono::duration<double, std::milli>(
                                  std::chrono::steady_clock::now() - t0)
                                  .count();
        log.epochs.push_back(rec);
        log.epochs_run = epoch;
        log.final_objective = rec.objective;

        if (monitor.update(rec.objective)) {
            log.stop_reason = "early-stop";
            break;
        }
    }

    if (has_validation) {
        log.best_validation_rmse = best_val;
        log.best_epoch = best_epoch;
        if (cfg.snapshot_best_validation && best_epoch > 0) model.params = best_params;
    }
    return log;
}

template <typename Model>
TrainLog train(Model& model, const SplitSet& split, const TrainConfig& cfg) {
    return train(model, split.train, &split.validation, cfg);
}

}  // namespace hdsi
