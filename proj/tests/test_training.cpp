#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <variant>
#include <vector>

#include "gtest/gtest.h"
#include "hdsi/baselines.hpp"
#include "hdsi/checkpoint.hpp"
#include "hdsi/gradcheck.hpp"
#include "hdsi/metrics.hpp"
#include "hdsi/ntcn.hpp"
#include "hdsi/optimizer.hpp"
#include "hdsi/trainer.hpp"

namespace {

using namespace hdsi;

std::vector<ParamBlock> one_block(const char* name, std::vector<double>& v) {
    return {{name, v.data(), v.size(), {v.size()}}};
}

TEST(Sgd, TakesPlainGradientStep) {
    std::vector<double> theta{1.0};
    std::vector<double> grad{0.5};
    auto pb = one_block("theta", theta);
    auto gb = one_block("theta", grad);
    sgd_step(pb, gb, 0.1);
    EXPECT_DOUBLE_EQ(theta[0], 0.95);
}

TEST(Sgd, TwoHalfStepsEqualOneFullStep) {
    std::vector<double> once{1.0}, twice{1.0};
    std::vector<double> grad{0.5};
    auto gb = one_block("theta", grad);
    auto p1 = one_block("theta", once);
    sgd_step(p1, gb, 0.25);
    auto p2 = one_block("theta", twice);
    sgd_step(p2, gb, 0.125);
    sgd_step(p2, gb, 0.125);
    EXPECT_DOUBLE_EQ(once[0], 0.875);
    EXPECT_DOUBLE_EQ(twice[0], once[0]);
}

TEST(Sgd, RejectsMisalignedBlocks) {
    std::vector<double> theta{1.0, 2.0};
    std::vector<double> grad{0.5};
    auto pb = one_block("theta", theta);
    auto gb = one_block("theta", grad);
    EXPECT_THROW(sgd_step(pb, gb, 0.1), ShapeError);
}

TEST(Adam, FirstStepMovesByRoughlyLearningRate) {
    std::vector<double> theta{0.5};
    std::vector<double> grad{0.3};
    auto pb = one_block("theta", theta);
    auto gb = one_block("theta", grad);
    auto state = AdamState::for_blocks(pb);
    adam_step(pb, gb, state, 0.1);
    EXPECT_NEAR(theta[0], 0.4, 1e-8);
    EXPECT_EQ(state.step, 1u);
}

TEST(Adam, ZeroGradientLeavesParametersUntouched) {
    std::vector<double> theta{0.7};
    std::vector<double> grad{0.0};
    auto pb = one_block("theta", theta);
    auto gb = one_block("theta", grad);
    auto state = AdamState::for_blocks(pb);
    adam_step(pb, gb, state, 0.1);
    adam_step(pb, gb, state, 0.1);
    EXPECT_DOUBLE_EQ(theta[0], 0.7);
}

TEST(Adam, MatchesFrozenTwoStepTrace) {
    std::vector<double> theta{1.0};
    auto pb = one_block("theta", theta);
    auto state = AdamState::for_blocks(pb);

    std::vector<double> g1{0.2};
    auto gb1 = one_block("theta", g1);
    adam_step(pb, gb1, state, 0.1);
    EXPECT_NEAR(theta[0], 0.90000000499999975, 1e-15);

    std::vector<double> g2{-0.1};
    auto gb2 = one_block("theta", g2);
    adam_step(pb, gb2, state, 0.1);
    EXPECT_NEAR(theta[0], 0.87336630271867557945, 1e-15);
}

TEST(Adam, RejectsStateBuiltForDifferentShape) {
    std::vector<double> theta{1.0, 2.0};
    std::vector<double> grad{0.1, 0.1};
    std::vector<double> other{1.0};
    auto pb = one_block("theta", theta);
    auto gb = one_block("theta", grad);
    auto small = one_block("theta", other);
    auto state = AdamState::for_blocks(small);
    EXPECT_THROW(adam_step(pb, gb, state, 0.1), ShapeError);
}

TEST(EarlyStop, NeverFiresOnTheFirstObservation) {
    EarlyStopMonitor m(1e9);
    EXPECT_FALSE(m.update(0.5));
    EXPECT_TRUE(m.update(0.5));
}

TEST(EarlyStop, FiresWhenConsecutiveObjectivesConverge) {
    EarlyStopMonitor m(1e-5);
    EXPECT_FALSE(m.update(0.5));
    EXPECT_FALSE(m.update(0.4));
    EXPECT_TRUE(m.update(0.4000095));
}

TEST(EarlyStop, HaltsExactlyWhereTheTraceFirstConverges) {
    const std::vector<double> trace{1.0, 0.9, 0.5, 0.49999999, 0.3, 0.3};
    EarlyStopMonitor m(1e-5);
    int fired_at = -1;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        if (m.update(trace[i])) {
            fired_at = static_cast<int>(i);
            break;
        }
    }
    EXPECT_EQ(fired_at, 3);
}

TEST(EarlyStop, NonPositiveToleranceDisablesTheCheck) {
    EarlyStopMonitor m(0.0);
    EXPECT_FALSE(m.update(0.5));
    EXPECT_FALSE(m.update(0.5));
    EXPECT_FALSE(m.update(0.5));
}

ObservationSet tiny_train_set() {
    ObservationSet set;
    set.dims = {3, 3, 3};
    set.entries = {
        {0, 0, 0, 0.8}, {0, 1, 2, 0.3}, {0, 2, 1, 0.6}, {1, 0, 1, 0.4}, {1, 1, 0, 0.7},
        {1, 2, 2, 0.2}, {2, 0, 2, 0.5}, {2, 1, 1, 0.9}, {2, 2, 0, 0.35}, {2, 2, 2, 0.65},
    };
    return set;
}

TEST(Train, FullBatchDescentDecreasesObjectiveMonotonically) {
    auto set = tiny_train_set();
    auto model = TuckerModel::init(set.dims, 2, 3, BaselineLoss::squared, 1.0, 0.5);
    TrainConfig cfg;
    cfg.optimizer = OptimizerKind::sgd;
    cfg.lr = 0.05;
    cfg.batch_size = 1000;
    cfg.max_epochs = 100;
    cfg.early_stop_tol = 0;
    cfg.lambda = 0.0;
    cfg.seed = 3;
    const auto log = train(model, set, nullptr, cfg);

    ASSERT_EQ(log.epochs_run, 100);
    EXPECT_EQ(log.stop_reason, "max-epochs");
    EXPECT_DOUBLE_EQ(log.final_objective, log.epochs.back().objective);
    for (std::size_t i = 1; i < log.epochs.size(); ++i)
        EXPECT_LE(log.epochs[i].objective, log.epochs[i - 1].objective + 1e-12)
            << "objective rose at epoch " << log.epochs[i].epoch;
    EXPECT_LT(log.final_objective, log.epochs.front().objective);
}

TEST(Train, EarlyStopEndsTrainingBeforeTheEpochCap) {
    auto set = tiny_train_set();
    auto model = TuckerModel::init(set.dims, 2, 3, BaselineLoss::squared, 1.0, 0.5);
    TrainConfig cfg;
    cfg.optimizer = OptimizerKind::sgd;
    cfg.lr = 0.05;
    cfg.batch_size = 1000;
    cfg.max_epochs = 5000;
    cfg.early_stop_tol = 1e-5;
    cfg.lambda = 0.0;
    cfg.seed = 3;
    const auto log = train(model, set, nullptr, cfg);
    EXPECT_EQ(log.stop_reason, "early-stop");
    EXPECT_GE(log.epochs_run, 2);
    EXPECT_LT(log.epochs_run, 5000);
    const auto n = log.epochs.size();
    ASSERT_GE(n, 2u);
    EXPECT_LT(std::abs(log.epochs[n - 1].objective - log.epochs[n - 2].objective), 1e-5);
}

TEST(Train, ObjectiveMatchesResidualPlusGlobalRegularization) {
    auto set = tiny_train_set();
    auto model = TuckerModel::init(set.dims, 2, 9, BaselineLoss::squared, 1.0, 0.5);
    double resid = 0.0;
    for (const auto& ob : set.entries) resid += model.residual_loss_value(ob);
    const double lambda = 0.01;
    EXPECT_NEAR(training_objective(model, set, lambda),
                resid + lambda * model.squared_norm_value(), 1e-12);
}

TEST(Train, SnapshotRestoresTheBestValidationEpoch) {
    // Training values sit far from the validation values, so validation RMSE
    // only degrades as the fit improves and epoch 1 stays the best.
    ObservationSet train_set;
    train_set.dims = {2, 2, 2};
    train_set.entries = {{0, 0, 0, 0.9}, {0, 1, 1, 0.9}, {1, 0, 1, 0.9}, {1, 1, 0, 0.9}};
    ObservationSet val_set;
    val_set.dims = train_set.dims;
    val_set.entries = {{0, 0, 1, 0.0}, {1, 1, 1, 0.0}};

    TrainConfig cfg;
    cfg.optimizer = OptimizerKind::adam;
    cfg.lr = 0.05;
    cfg.batch_size = 1000;
    cfg.max_epochs = 60;
    cfg.early_stop_tol = 0;
    cfg.lambda = 0.0;
    cfg.seed = 1;

    auto snapped = CpModel::init(train_set.dims, 2, 1, BaselineLoss::squared, 1.0, 0.1);
    const auto log = train(snapped, train_set, &val_set, cfg);
    ASSERT_EQ(log.best_epoch, 1);
    EXPECT_DOUBLE_EQ(evaluate_model(snapped, val_set).rmse, log.best_validation_rmse);
    EXPECT_DOUBLE_EQ(log.epochs.front().validation_rmse, log.best_validation_rmse);

    auto raw = CpModel::init(train_set.dims, 2, 1, BaselineLoss::squared, 1.0, 0.1);
    auto raw_cfg = cfg;
    raw_cfg.snapshot_best_validation = false;
    const auto raw_log = train(raw, train_set, &val_set, raw_cfg);
    EXPECT_EQ(raw_log.best_epoch, 1);
    EXPECT_GT(evaluate_model(raw, val_set).rmse, raw_log.best_validation_rmse);
}

TEST(Train, IdenticalConfigsProduceBitIdenticalRuns) {
    auto set = tiny_train_set();
    const auto sp = split(set, {6, 2, 2}, 11);

    TrainConfig cfg;
    cfg.optimizer = OptimizerKind::adam;
    cfg.lr = 0.01;
    cfg.batch_size = 2;
    cfg.max_epochs = 40;
    cfg.early_stop_tol = 0;
    cfg.lambda = 1e-4;
    cfg.seed = 7;

    auto m1 = TuckerModel::init(set.dims, 2, 7, BaselineLoss::squared, 1.0, 0.5);
    auto m2 = TuckerModel::init(set.dims, 2, 7, BaselineLoss::squared, 1.0, 0.5);
    const auto log1 = train(m1, sp, cfg);
    const auto log2 = train(m2, sp, cfg);

    EXPECT_EQ(m1.params.g.v, m2.params.g.v);
    EXPECT_EQ(m1.params.a.v, m2.params.a.v);
    EXPECT_EQ(m1.params.b.v, m2.params.b.v);
    EXPECT_EQ(m1.params.c.v, m2.params.c.v);
    ASSERT_EQ(log1.epochs.size(), log2.epochs.size());
    for (std::size_t i = 0; i < log1.epochs.size(); ++i) {
        EXPECT_EQ(log1.epochs[i].objective, log2.epochs[i].objective);
        EXPECT_EQ(log1.epochs[i].validation_rmse, log2.epochs[i].validation_rmse);
        EXPECT_EQ(log1.epochs[i].duration_ms, 0.0);
    }
    EXPECT_EQ(evaluate_model(m1, sp.test), evaluate_model(m2, sp.test));
}

TEST(Train, ShuffledMiniBatchesDifferFromUnshuffledOrder) {
    auto set = tiny_train_set();
    TrainConfig cfg;
    cfg.optimizer = OptimizerKind::sgd;
    cfg.lr = 0.05;
    cfg.batch_size = 1;
    cfg.max_epochs = 5;
    cfg.early_stop_tol = 0;
    cfg.lambda = 0.0;

    cfg.seed = 1;
    auto m1 = TuckerModel::init(set.dims, 2, 5, BaselineLoss::squared, 1.0, 0.5);
    train(m1, set, nullptr, cfg);
    cfg.seed = 2;
    auto m2 = TuckerModel::init(set.dims, 2, 5, BaselineLoss::squared, 1.0, 0.5);
    train(m2, set, nullptr, cfg);
    EXPECT_NE(m1.params.g.v, m2.params.g.v);
}

TEST(Train, DivergenceRaisesWithTheFailingEpoch) {
    auto set = tiny_train_set();
    auto model = TuckerModel::init(set.dims, 2, 3, BaselineLoss::squared, 1.0, 0.5);
    TrainConfig cfg;
    cfg.optimizer = OptimizerKind::sgd;
    cfg.lr = 1e6;
    cfg.batch_size = 1000;
    cfg.max_epochs = 50;
    cfg.early_stop_tol = 0;
    cfg.lambda = 0.0;
    try {
        train(model, set, nullptr, cfg);
        FAIL() << "expected DivergenceError";
    } catch (const DivergenceError& e) {
        EXPECT_GE(e.epoch, 1);
        EXPECT_LE(e.epoch, 50);
    }
}

TEST(Train, RejectsBadConfigsAndEmptyData) {
    auto set = tiny_train_set();
    auto model = TuckerModel::init(set.dims, 2, 3);
    TrainConfig cfg;
    cfg.lr = 0.0;
    EXPECT_THROW(train(model, set, nullptr, cfg), ValidationError);
    cfg = TrainConfig{};
    cfg.batch_size = 0;
    EXPECT_THROW(train(model, set, nullptr, cfg), ValidationError);
    cfg = TrainConfig{};
    cfg.max_epochs = 0;
    EXPECT_THROW(train(model, set, nullptr, cfg), ValidationError);
    cfg = TrainConfig{};
    cfg.lambda = -0.1;
    EXPECT_THROW(train(model, set, nullptr, cfg), ValidationError);
    cfg = TrainConfig{};
    cfg.divergence_threshold = 0.0;
    EXPECT_THROW(train(model, set, nullptr, cfg), ValidationError);

    ObservationSet empty;
    empty.dims = set.dims;
    cfg = TrainConfig{};
    EXPECT_THROW(train(model, empty, nullptr, cfg), ValidationError);
}

TEST(Evaluate, MatchesHandComputedErrorStatistics) {
    ObservationSet set;
    set.dims = {4, 1, 1};
    set.entries = {{0, 0, 0, 0.5}, {1, 0, 0, 0.25}, {2, 0, 0, 0.75}, {3, 0, 0, 1.0}};
    const auto perfect = evaluate([&](int s, int, int) { return set.entries[s].value; }, set);
    EXPECT_DOUBLE_EQ(perfect.rmse, 0.0);
    EXPECT_DOUBLE_EQ(perfect.mae, 0.0);
    EXPECT_EQ(perfect.count, 4u);

    ObservationSet two;
    two.dims = {2, 1, 1};
    two.entries = {{0, 0, 0, 1.0}, {1, 0, 0, -1.0}};
    const auto unit = evaluate([](int, int, int) { return 0.0; }, two);
    EXPECT_DOUBLE_EQ(unit.mae, 1.0);
    EXPECT_DOUBLE_EQ(unit.rmse, 1.0);

    two.entries = {{0, 0, 0, 1.0}, {1, 0, 0, 3.0}};
    const auto skew = evaluate([](int, int, int) { return 1.0; }, two);
    EXPECT_DOUBLE_EQ(skew.mae, 1.0);
    EXPECT_DOUBLE_EQ(skew.rmse, std::sqrt(2.0));
    EXPECT_GE(skew.rmse, skew.mae);
}

TEST(Evaluate, IsInvariantToEntryOrder) {
    Rng rng(31);
    ObservationSet set;
    set.dims = {10, 1, 1};
    for (int s = 0; s < 10; ++s)
        set.entries.push_back({s, 0, 0, rng.uniform(0.0, 1.0)});
    auto pred = [](int s, int, int) { return 0.1 * s; };
    const auto before = evaluate(pred, set);
    std::reverse(set.entries.begin(), set.entries.end());
    const auto after = evaluate(pred, set);
    EXPECT_NEAR(after.rmse, before.rmse, 1e-15);
    EXPECT_NEAR(after.mae, before.mae, 1e-15);
    EXPECT_GE(before.rmse, before.mae);
}

TEST(Evaluate, RejectsEmptySetAndRecordsScale) {
    ObservationSet empty;
    empty.dims = {1, 1, 1};
    EXPECT_THROW(evaluate([](int, int, int) { return 0.0; }, empty), ValidationError);

    ObservationSet one;
    one.dims = {1, 1, 1};
    one.entries = {{0, 0, 0, 0.5}};
    EXPECT_EQ(evaluate([](int, int, int) { return 0.5; }, one, "sigmoid").scale, "sigmoid");
}

TEST(Evaluate, ModelEvaluationUsesClampedPredictions) {
    auto cp = CpModel::init(Dims{1, 1, 1}, 1, 1);
    cp.params.a.v = {2.0};
    cp.params.b.v = {2.0};
    cp.params.c.v = {2.0};
    ObservationSet set;
    set.dims = {1, 1, 1};
    set.entries = {{0, 0, 0, 1.0}};
    EXPECT_DOUBLE_EQ(evaluate_model(cp, set).rmse, 0.0);
}

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

PipelineInfo sample_pipeline() {
    PipelineInfo p;
    p.preprocess = PreprocessKind::minmax;
    p.minmax = ScaleRecord{2.0, 6.0, false};
    p.ratio = SplitRatio{7.0, 2.0, 1.0};
    p.seed = 42;
    return p;
}

ObservationSet probe_set(const Dims& dims, int count, std::uint64_t seed) {
    Rng rng(seed);
    ObservationSet set;
    set.dims = dims;
    for (int i = 0; i < count; ++i)
        set.entries.push_back({static_cast<int>(rng.below(static_cast<std::uint64_t>(dims.stations))),
                               static_cast<int>(rng.below(static_cast<std::uint64_t>(dims.indicators))),
                               static_cast<int>(rng.below(static_cast<std::uint64_t>(dims.times))),
                               rng.uniform(0.0, 1.0)});
    return set;
}

TEST(Checkpoint, NtcnRoundTripsBitExactly) {
    const Dims dims{3, 4, 5};
    auto model = NtcnModel::init(tiny_ntcn_config(), dims, 17);
    Rng rng(55);
    for (auto& blk : model.blocks())
        for (std::size_t i = 0; i < blk.size; ++i) blk.data[i] = rng.uniform(-0.6, 0.6);

    const auto path = temp_path("hdsi_ckpt_ntcn.json");
    save_checkpoint(path, model, sample_pipeline());
    auto loaded = load_checkpoint(path);
    std::filesystem::remove(path);

    ASSERT_TRUE(std::holds_alternative<NtcnModel>(loaded.model));
    auto& restored = std::get<NtcnModel>(loaded.model);
    EXPECT_EQ(restored.dims, dims);
    EXPECT_EQ(restored.config.rank_n, model.config.rank_n);
    EXPECT_EQ(restored.config.c1, model.config.c1);
    EXPECT_EQ(restored.params.a.v, model.params.a.v);
    EXPECT_EQ(restored.params.w1.v, model.params.w1.v);
    EXPECT_EQ(restored.params.w4, model.params.w4);
    EXPECT_EQ(restored.params.b_o, model.params.b_o);

    EXPECT_EQ(loaded.pipeline.preprocess, PreprocessKind::minmax);
    ASSERT_TRUE(loaded.pipeline.minmax.has_value());
    EXPECT_EQ(loaded.pipeline.minmax->min, 2.0);
    EXPECT_EQ(loaded.pipeline.minmax->max, 6.0);
    EXPECT_EQ(loaded.pipeline.ratio, (SplitRatio{7.0, 2.0, 1.0}));
    EXPECT_EQ(loaded.pipeline.seed, 42u);

    const auto probe = probe_set(dims, 40, 5);
    EXPECT_EQ(evaluate_model(restored, probe), evaluate_model(model, probe));
}

TEST(Checkpoint, TuckerRoundTripsBitExactly) {
    const Dims dims{4, 3, 6};
    auto model = TuckerModel::init(dims, 3, 23, BaselineLoss::cauchy, 0.7, 0.5);
    const auto path = temp_path("hdsi_ckpt_tucker.json");
    save_checkpoint(path, model, sample_pipeline());
    auto loaded = load_checkpoint(path);
    std::filesystem::remove(path);

    ASSERT_TRUE(std::holds_alternative<TuckerModel>(loaded.model));
    auto& restored = std::get<TuckerModel>(loaded.model);
    EXPECT_EQ(restored.loss, BaselineLoss::cauchy);
    EXPECT_EQ(restored.gamma, 0.7);
    EXPECT_EQ(restored.params.g.v, model.params.g.v);
    EXPECT_EQ(restored.params.a.v, model.params.a.v);

    const auto probe = probe_set(dims, 40, 6);
    EXPECT_EQ(evaluate_model(restored, probe), evaluate_model(model, probe));
}

TEST(Checkpoint, CpRoundTripsBitExactly) {
    const Dims dims{5, 2, 4};
    auto model = CpModel::init(dims, 4, 29, BaselineLoss::squared, 1.0, 0.5);
    const auto path = temp_path("hdsi_ckpt_cp.json");
    save_checkpoint(path, model, sample_pipeline());
    auto loaded = load_checkpoint(path);
    std::filesystem::remove(path);

    ASSERT_TRUE(std::holds_alternative<CpModel>(loaded.model));
    auto& restored = std::get<CpModel>(loaded.model);
    EXPECT_EQ(restored.rank, 4);
    EXPECT_EQ(restored.params.a.v, model.params.a.v);
    EXPECT_EQ(restored.params.b.v, model.params.b.v);
    EXPECT_EQ(restored.params.c.v, model.params.c.v);

    const auto probe = probe_set(dims, 40, 7);
    EXPECT_EQ(evaluate_model(restored, probe), evaluate_model(model, probe));
}

TEST(Checkpoint, SigmoidPipelineKeepsMinmaxAbsent) {
    auto model = CpModel::init(Dims{2, 2, 2}, 2, 1);
    PipelineInfo pipe;
    pipe.preprocess = PreprocessKind::sigmoid;
    pipe.seed = 9;
    const auto path = temp_path("hdsi_ckpt_sigmoid.json");
    save_checkpoint(path, model, pipe);
    const auto loaded = load_checkpoint(path);
    std::filesystem::remove(path);
    EXPECT_EQ(loaded.pipeline.preprocess, PreprocessKind::sigmoid);
    EXPECT_FALSE(loaded.pipeline.minmax.has_value());
}

TEST(Checkpoint, RejectsBrokenDocuments) {
    EXPECT_THROW(load_checkpoint(temp_path("hdsi_ckpt_does_not_exist.json")), IoError);

    const auto path = temp_path("hdsi_ckpt_broken.json");
    std::ofstream(path) << "{ \"format\": \"hds-impute/checkpo";
    EXPECT_THROW(load_checkpoint(path), FormatError);
    std::filesystem::remove(path);

    auto model = CpModel::init(Dims{2, 2, 2}, 2, 1);
    auto good = checkpoint_to_json(model, sample_pipeline());

    auto bad_format = good;
    bad_format["format"] = "something-else";
    EXPECT_THROW(checkpoint_from_json(bad_format), FormatError);

    auto bad_version = good;
    bad_version["version"] = 2;
    EXPECT_THROW(checkpoint_from_json(bad_version), VersionError);

    auto bad_kind = good;
    bad_kind["model"] = "gru";
    EXPECT_THROW(checkpoint_from_json(bad_kind), FormatError);

    auto missing_block = good;
    missing_block["params"].erase("A");
    EXPECT_THROW(checkpoint_from_json(missing_block), FormatError);

    auto bad_shape = good;
    bad_shape["params"]["A"]["shape"][1] = 3;
    EXPECT_THROW(checkpoint_from_json(bad_shape), ShapeError);

    auto short_values = good;
    short_values["params"]["A"]["values"].erase(0);
    EXPECT_THROW(checkpoint_from_json(short_values), ShapeError);

    auto no_params = good;
    no_params.erase("params");
    EXPECT_THROW(checkpoint_from_json(no_params), FormatError);
}

}  // namespace
