// hds-impute: train, evaluate, and run sparse sensor-tensor imputation models
// from the command line. Subcommands: synth, train, eval, impute, gradcheck.
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <unordered_set>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hdsi/hdsi.hpp"

namespace {

constexpr const char* kToolVersion = "1.0.0";
constexpr int kExitOk = 0;
constexpr int kExitVerifyFail = 1;
constexpr int kExitUsage = 2;
constexpr int kExitDiverged = 3;

using nlohmann::json;

std::vector<long long> parse_int_list(const std::string& text, char sep, std::size_t count,
                                      const std::string& what) {
    std::vector<long long> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto next = text.find(sep, pos);
        const std::string tok = text.substr(pos, next == std::string::npos ? next : next - pos);
        try {
            std::size_t used = 0;
            out.push_back(std::stoll(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw hdsi::ValidationError(what + ": cannot parse '" + text + "'");
        }
        if (next == std::string::npos) break;
        pos = next + 1;
    }
    if (out.size() != count)
        throw hdsi::ValidationError(what + ": expected " + std::to_string(count) +
                                    " values, got " + std::to_string(out.size()));
    return out;
}

std::vector<double> parse_double_list(const std::string& text, char sep, std::size_t count,
                                      const std::string& what) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto next = text.find(sep, pos);
        const std::string tok = text.substr(pos, next == std::string::npos ? next : next - pos);
        try {
            std::size_t used = 0;
            out.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw hdsi::ValidationError(what + ": cannot parse '" + text + "'");
        }
        if (next == std::string::npos) break;
        pos = next + 1;
    }
    if (out.size() != count)
        throw hdsi::ValidationError(what + ": expected " + std::to_string(count) +
                                    " values, got " + std::to_string(out.size()));
    return out;
}

std::string file_digest_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw hdsi::IoError("cannot open '" + path + "' for digest");
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::uint64_t h = hdsi::fnv1a64(bytes.data(), bytes.size());
    char buf[19];
    std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw hdsi::IoError("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw hdsi::IoError("short write to '" + path + "'");
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
    std::string out;
    std::string truth_out;
    std::string dims_text;
    int rank = 3;
    double density = 0.1;
    double noise = 0.0;
    std::string nonlinearity = "none";
    std::uint64_t seed = 1;
};

int run_synth(const SynthArgs& a) {
    const auto d = parse_int_list(a.dims_text, ',', 3, "--dims");
    hdsi::SynthSpec spec;
    spec.dims = hdsi::Dims{static_cast<int>(d[0]), static_cast<int>(d[1]), static_cast<int>(d[2])};
    spec.rank = a.rank;
    spec.density = a.density;
    spec.noise_stddev = a.noise;
    spec.nonlinearity = hdsi::nonlinearity_from_string(a.nonlinearity);
    spec.seed = a.seed;

    const hdsi::SynthResult result = hdsi::synthesize_with_truth(spec);
    hdsi::save_coo(a.out, result.observed, "generated by hds-impute synth");

    hdsi::ObservationSet truth;
    truth.dims = spec.dims;
    truth.entries.reserve(result.truth.size());
    std::size_t idx = 0;
    for (int s = 0; s < spec.dims.stations; ++s)
        for (int p = 0; p < spec.dims.indicators; ++p)
            for (int t = 0; t < spec.dims.times; ++t)
                truth.entries.push_back({s, p, t, result.truth[idx++]});
    const std::string truth_path = a.truth_out.empty() ? a.out + ".truth" : a.truth_out;
    hdsi::save_coo(truth_path, truth, "noiseless ground truth for every cell");

    std::cout << "wrote " << result.observed.entries.size() << " observed entries to " << a.out
              << "\nwrote ground truth (" << truth.entries.size() << " cells) to " << truth_path
              << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// shared train/eval plumbing

hdsi::ObservationSet load_data_or_usage(const std::string& path) {
    return hdsi::load_coo(path);  // throws hdsi errors mapped to exit 2
}

struct PreprocessOutcome {
    hdsi::ObservationSet set;
    hdsi::PipelineInfo pipeline;
};

PreprocessOutcome run_preprocess(const hdsi::ObservationSet& raw, hdsi::PreprocessKind kind,
                                 const hdsi::SplitRatio& ratio, std::uint64_t seed) {
    PreprocessOutcome out;
    out.pipeline.preprocess = kind;
    out.pipeline.ratio = ratio;
    out.pipeline.seed = seed;
    if (kind == hdsi::PreprocessKind::sigmoid) {
        out.set = hdsi::preprocess_sigmoid(raw);
    } else {
        auto res = hdsi::preprocess_minmax(raw);
        out.set = std::move(res.set);
        out.pipeline.minmax = res.scale;
    }
    return out;
}

// Replays a stored pipeline on freshly loaded raw data. Minmax reuses the
// stored scale so values land in the training-time frame even if the file
// changed.
hdsi::ObservationSet replay_preprocess(const hdsi::ObservationSet& raw,
                                       const hdsi::PipelineInfo& pipeline) {
    if (pipeline.preprocess == hdsi::PreprocessKind::sigmoid) return hdsi::preprocess_sigmoid(raw);
    if (!pipeline.minmax.has_value())
        throw hdsi::FormatError("checkpoint: minmax preprocessing without a stored scale record");
    hdsi::ObservationSet out = raw;
    for (auto& e : out.entries) e.value = pipeline.minmax->apply(e.value);
    return out;
}

const hdsi::ObservationSet& pick_part(const hdsi::SplitSet& split, const std::string& part) {
    if (part == "train") return split.train;
    if (part == "validation") return split.validation;
    if (part == "test") return split.test;
    throw hdsi::ValidationError("--part must be train, validation, or test (got '" + part + "')");
}

hdsi::Dims checkpoint_dims(const hdsi::LoadedCheckpoint& ck) {
    return std::visit([](const auto& m) { return m.dims; }, ck.model);
}

json eval_report_json(const hdsi::EvalReport& rep, const std::string& part) {
    json j;
    j["format"] = "hds-impute/eval";
    j["version"] = 1;
    j["part"] = part;
    j["rmse"] = rep.rmse;
    j["mae"] = rep.mae;
    j["count"] = rep.count;
    j["scale"] = rep.scale;
    return j;
}

void print_eval_report(const hdsi::EvalReport& rep, const std::string& part) {
    std::printf("part         %s\n", part.c_str());
    std::printf("count        %zu\n", rep.count);
    std::printf("scale        %s\n", rep.scale.c_str());
    std::printf("rmse         %.9g\n", rep.rmse);
    std::printf("mae          %.9g\n", rep.mae);
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
    std::string data;
    std::string out_dir = ".";
    std::string config_file;
    std::string model = "ntcn";
    std::string preprocess = "sigmoid";
    std::string split_text = "1:2:7";
    int rank = 10;
    std::string channels_text = "8,16";
    std::string kernels_text = "6,5";
    int hidden = 32;
    double lambda = 1e-4;
    std::string optimizer;  // empty means per-model default
    double lr = 0.0;        // 0 means per-optimizer default
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    int batch_size = 1;
    int epochs = 1000;
    double early_stop_tol = 1e-5;
    std::uint64_t seed = 1;
    bool deterministic = true;
    bool conv_bias = true;
    bool snapshot_best = true;
    std::string loss = "squared";
    double gamma = 1.0;
    double init_bound = 0.004;
};

// defaults < config file < explicit flags
void apply_config_file(TrainArgs& a, const CLI::App* cmd) {
    if (a.config_file.empty()) return;
    std::ifstream in(a.config_file, std::ios::binary);
    if (!in) throw hdsi::IoError("cannot open config file '" + a.config_file + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw hdsi::FormatError("config file '" + a.config_file + "' is not valid JSON: " +
                                e.what());
    }
    if (!j.is_object()) throw hdsi::FormatError("config file must hold a JSON object");
    auto take = [&](const char* key, const std::string& flag, auto& target) {
        if (j.contains(key) && cmd->count(flag) == 0)
            target = j.at(key).get<std::decay_t<decltype(target)>>();
    };
    take("model", "--model", a.model);
    take("preprocess", "--preprocess", a.preprocess);
    take("split", "--split", a.split_text);
    take("rank", "--rank", a.rank);
    take("channels", "--channels", a.channels_text);
    take("kernels", "--kernels", a.kernels_text);
    take("hidden", "--hidden", a.hidden);
    take("lambda", "--lambda", a.lambda);
    take("optimizer", "--optimizer", a.optimizer);
    take("lr", "--lr", a.lr);
    take("beta1", "--beta1", a.beta1);
    take("beta2", "--beta2", a.beta2);
    take("adam_eps", "--adam-eps", a.adam_eps);
    take("batch_size", "--batch-size", a.batch_size);
    take("epochs", "--epochs", a.epochs);
    take("early_stop_tol", "--early-stop-tol", a.early_stop_tol);
    take("seed", "--seed", a.seed);
    take("deterministic", "--deterministic", a.deterministic);
    take("conv_bias", "--conv-bias", a.conv_bias);
    take("snapshot_best", "--snapshot-best", a.snapshot_best);
    take("loss", "--loss", a.loss);
    take("gamma", "--gamma", a.gamma);
    take("init_bound", "--init-bound", a.init_bound);
}

struct ResolvedTrain {
    hdsi::OptimizerKind optimizer;
    double lr;
};

ResolvedTrain resolve_optimizer(const TrainArgs& a) {
    ResolvedTrain r{};
    if (!a.optimizer.empty())
        r.optimizer = hdsi::optimizer_from_string(a.optimizer);
    else
        r.optimizer = a.model == "ntcn" ? hdsi::OptimizerKind::adam : hdsi::OptimizerKind::sgd;
    r.lr = a.lr > 0.0 ? a.lr : (r.optimizer == hdsi::OptimizerKind::adam ? 1e-3 : 0.01);
    return r;
}

json resolved_config_json(const TrainArgs& a, const ResolvedTrain& r,
                          const hdsi::SplitRatio& ratio) {
    json j;
    j["model"] = a.model;
    j["preprocess"] = a.preprocess;
    j["split"] = json{{"train", ratio.r1}, {"validation", ratio.r2}, {"test", ratio.r3}};
    j["rank"] = a.rank;
    j["channels"] = a.channels_text;
    j["kernels"] = a.kernels_text;
    j["hidden"] = a.hidden;
    j["lambda"] = a.lambda;
    j["optimizer"] = hdsi::to_string(r.optimizer);
    j["lr"] = r.lr;
    j["beta1"] = a.beta1;
    j["beta2"] = a.beta2;
    j["adam_eps"] = a.adam_eps;
    j["batch_size"] = a.batch_size;
    j["epochs"] = a.epochs;
    j["early_stop_tol"] = a.early_stop_tol;
    j["seed"] = a.seed;
    j["deterministic"] = a.deterministic;
    j["conv_bias"] = a.conv_bias;
    j["snapshot_best"] = a.snapshot_best;
    j["loss"] = a.loss;
    j["gamma"] = a.gamma;
    j["init_bound"] = a.init_bound;
    return j;
}

std::string trainlog_ndjson(const hdsi::TrainLog& log, bool deterministic) {
    std::string out;
    for (const auto& rec : log.epochs) {
        json j;
        j["epoch"] = rec.epoch;
        j["objective"] = rec.objective;
        j["data_loss"] = rec.data_loss;
        if (std::isfinite(rec.validation_rmse)) {
            j["validation_rmse"] = rec.validation_rmse;
            j["validation_mae"] = rec.validation_mae;
        }
        if (!deterministic) j["duration_ms"] = rec.duration_ms;
        out += j.dump();
        out += '\n';
    }
    json tail;
    tail["stop_reason"] = log.stop_reason;
    tail["epochs_run"] = log.epochs_run;
    tail["final_objective"] = log.final_objective;
    if (log.best_epoch > 0) {
        tail["best_epoch"] = log.best_epoch;
        tail["best_validation_rmse"] = log.best_validation_rmse;
    }
    out += tail.dump();
    out += '\n';
    return out;
}

int run_train(const TrainArgs& a, const CLI::App* cmd) {
    TrainArgs args = a;
    apply_config_file(args, cmd);

    const auto ratio_vals = parse_double_list(args.split_text, ':', 3, "--split");
    const hdsi::SplitRatio ratio{ratio_vals[0], ratio_vals[1], ratio_vals[2]};
    const auto pre_kind = hdsi::preprocess_from_string(args.preprocess);
    const ResolvedTrain resolved = resolve_optimizer(args);

    const hdsi::ObservationSet raw = load_data_or_usage(args.data);
    PreprocessOutcome pre = run_preprocess(raw, pre_kind, ratio, args.seed);
    const hdsi::SplitSet split = hdsi::split(pre.set, ratio, args.seed);

    hdsi::TrainConfig tcfg;
    tcfg.optimizer = resolved.optimizer;
    tcfg.lr = resolved.lr;
    tcfg.beta1 = args.beta1;
    tcfg.beta2 = args.beta2;
    tcfg.adam_eps = args.adam_eps;
    tcfg.batch_size = args.batch_size;
    tcfg.max_epochs = args.epochs;
    tcfg.early_stop_tol = args.early_stop_tol;
    tcfg.lambda = args.lambda;
    tcfg.seed = args.seed;
    tcfg.snapshot_best_validation = args.snapshot_best;
    tcfg.deterministic = args.deterministic;

    std::error_code ec;
    std::filesystem::create_directories(args.out_dir, ec);
    if (ec) throw hdsi::IoError("cannot create output directory '" + args.out_dir + "'");
    const std::string checkpoint_path = args.out_dir + "/checkpoint.json";
    const std::string trainlog_path = args.out_dir + "/trainlog.ndjson";
    const std::string manifest_path = args.out_dir + "/manifest.json";

    hdsi::TrainLog log;
    hdsi::EvalReport test_report;
    if (args.model == "ntcn") {
        hdsi::NtcnConfig cfg;
        cfg.set_rank(args.rank);
        const auto ch = parse_int_list(args.channels_text, ',', 2, "--channels");
        const auto ks = parse_int_list(args.kernels_text, ',', 2, "--kernels");
        cfg.c1 = static_cast<int>(ch[0]);
        cfg.c2 = static_cast<int>(ch[1]);
        cfg.k1 = static_cast<int>(ks[0]);
        cfg.k2 = static_cast<int>(ks[1]);
        cfg.h1 = args.hidden;
        cfg.lambda = args.lambda;
        cfg.init_bound = args.init_bound;
        cfg.conv_bias = args.conv_bias;
        cfg.seed = args.seed;
        auto model = hdsi::NtcnModel::init(cfg, raw.dims, args.seed);
        log = hdsi::train(model, split, tcfg);
        test_report = hdsi::evaluate_model(model, split.test, "transformed");
        hdsi::save_checkpoint(checkpoint_path, model, pre.pipeline);
    } else if (args.model == "tucker") {
        auto model = hdsi::TuckerModel::init(raw.dims, args.rank, args.seed,
                                             hdsi::baseline_loss_from_string(args.loss),
                                             args.gamma, args.init_bound);
        log = hdsi::train(model, split, tcfg);
        test_report = hdsi::evaluate_model(model, split.test, "transformed");
        hdsi::save_checkpoint(checkpoint_path, model, pre.pipeline);
    } else if (args.model == "cp") {
        auto model = hdsi::CpModel::init(raw.dims, args.rank, args.seed,
                                         hdsi::baseline_loss_from_string(args.loss), args.gamma,
                                         args.init_bound);
        log = hdsi::train(model, split, tcfg);
        test_report = hdsi::evaluate_model(model, split.test, "transformed");
        hdsi::save_checkpoint(checkpoint_path, model, pre.pipeline);
    } else {
        throw hdsi::ValidationError("--model must be ntcn, tucker, or cp (got '" + args.model +
                                    "')");
    }

    write_text_file(trainlog_path, trainlog_ndjson(log, args.deterministic));

    json manifest;
    manifest["format"] = "hds-impute/manifest";
    manifest["version"] = 1;
    manifest["command"] = "train";
    manifest["tool_version"] = kToolVersion;
    manifest["seed"] = args.seed;
    manifest["deterministic"] = args.deterministic;
    manifest["inputs"] =
        json{{"data", json{{"path", args.data}, {"fnv1a64", file_digest_hex(args.data)}}}};
    manifest["artifacts"] = json{{"checkpoint", checkpoint_path},
                                 {"trainlog", trainlog_path},
                                 {"manifest", manifest_path}};
    manifest["config"] = resolved_config_json(args, resolved, ratio);
    write_text_file(manifest_path, manifest.dump(2) + "\n");

    std::printf("trained %s for %d epochs (%s)\n", args.model.c_str(), log.epochs_run,
                log.stop_reason.c_str());
    if (log.best_epoch > 0)
        std::printf("best validation rmse %.9g at epoch %d\n", log.best_validation_rmse,
                    log.best_epoch);
    print_eval_report(test_report, "test");
    std::printf("artifacts: %s %s %s\n", checkpoint_path.c_str(), trainlog_path.c_str(),
                manifest_path.c_str());
    return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
    std::string checkpoint;
    std::string data;
    std::string part = "test";
    std::string json_out;
};

int run_eval(const EvalArgs& a) {
    const hdsi::LoadedCheckpoint ck = hdsi::load_checkpoint(a.checkpoint);
    const hdsi::ObservationSet raw = load_data_or_usage(a.data);
    const hdsi::Dims dims = checkpoint_dims(ck);
    if (raw.dims.stations != dims.stations || raw.dims.indicators != dims.indicators ||
        raw.dims.times != dims.times)
        throw hdsi::ValidationError("data dims (" + std::to_string(raw.dims.stations) + "," +
                                    std::to_string(raw.dims.indicators) + "," +
                                    std::to_string(raw.dims.times) +
                                    ") do not match checkpoint dims (" +
                                    std::to_string(dims.stations) + "," +
                                    std::to_string(dims.indicators) + "," +
                                    std::to_string(dims.times) + ")");

    const hdsi::ObservationSet pre = replay_preprocess(raw, ck.pipeline);
    const hdsi::SplitSet split = hdsi::split(pre, ck.pipeline.ratio, ck.pipeline.seed);
    const hdsi::ObservationSet& part = pick_part(split, a.part);

    const hdsi::EvalReport rep = std::visit(
        [&](const auto& m) { return hdsi::evaluate_model(m, part, "transformed"); }, ck.model);

    print_eval_report(rep, a.part);
    if (!a.json_out.empty())
        write_text_file(a.json_out, eval_report_json(rep, a.part).dump(2) + "\n");
    return kExitOk;
}

// ---------------------------------------------------------------------------
// impute

struct ImputeArgs {
    std::string checkpoint;
    std::string out;
    std::string data;
    bool missing_only = false;
    bool invert = false;
};

double invert_value(const hdsi::PipelineInfo& pipeline, double v) {
    if (pipeline.preprocess == hdsi::PreprocessKind::minmax) {
        if (!pipeline.minmax.has_value())
            throw hdsi::FormatError("checkpoint: minmax preprocessing without a scale record");
        return pipeline.minmax->invert(v);
    }
    const double clamped = std::clamp(v, 1e-12, 1.0 - 1e-12);
    return std::log(clamped / (1.0 - clamped));
}

int run_impute(const ImputeArgs& a) {
    const hdsi::LoadedCheckpoint ck = hdsi::load_checkpoint(a.checkpoint);
    const hdsi::Dims dims = checkpoint_dims(ck);

    std::unordered_set<std::uint64_t> observed;
    if (a.missing_only) {
        if (a.data.empty())
            throw hdsi::ValidationError("--missing-only requires --data to know observed cells");
        const hdsi::ObservationSet raw = load_data_or_usage(a.data);
        if (raw.dims.stations != dims.stations || raw.dims.indicators != dims.indicators ||
            raw.dims.times != dims.times)
            throw hdsi::ValidationError("data dims do not match checkpoint dims");
        for (const auto& e : raw.entries)
            observed.insert(hdsi::cell_key(dims, e.station, e.indicator, e.time));
    }

    // NTCN predicts through impute_full (parallel over stations); the
    // baselines are cheap enough to loop inline.
    std::vector<double> dense;
    std::visit(
        [&](const auto& m) {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, hdsi::NtcnModel>) {
                dense = hdsi::impute_full(m.params, dims);
            } else {
                dense.resize(dims.total());
                std::size_t idx = 0;
                for (int s = 0; s < dims.stations; ++s)
                    for (int p = 0; p < dims.indicators; ++p)
                        for (int t = 0; t < dims.times; ++t) dense[idx++] = m.predict_eval(s, p, t);
            }
        },
        ck.model);

    std::ofstream out(a.out, std::ios::binary);
    if (!out) throw hdsi::IoError("cannot open '" + a.out + "' for writing");
    out << "# imputed tensor (" << (a.invert ? "raw" : "transformed") << " scale)\n";
    out << dims.stations << "," << dims.indicators << "," << dims.times << "\n";
    std::size_t idx = 0;
    std::size_t written = 0;
    for (int s = 0; s < dims.stations; ++s)
        for (int p = 0; p < dims.indicators; ++p)
            for (int t = 0; t < dims.times; ++t, ++idx) {
                if (a.missing_only &&
                    observed.count(hdsi::cell_key(dims, s, p, t)) > 0)
                    continue;
                const double v = a.invert ? invert_value(ck.pipeline, dense[idx]) : dense[idx];
                out << s << "," << p << "," << t << "," << hdsi::detail::format_double(v) << "\n";
                ++written;
            }
    if (!out) throw hdsi::IoError("short write to '" + a.out + "'");
    std::cout << "wrote " << written << " cells to " << a.out << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// gradcheck

struct GradcheckArgs {
    int tiny_seeds = 5;
    double tol = hdsi::kGradCheckTol;
    bool full = true;
    bool inject_fault = false;
};

void print_gradcheck_report(const std::string& label, const hdsi::GradCheckReport& rep,
                            double tol) {
    std::printf("%-28s max rel err %.3e  %s\n", label.c_str(), rep.max_rel_err,
                rep.pass(tol) ? "PASS" : "FAIL");
    for (const auto& g : rep.groups)
        std::printf("    %-8s rel %.3e  (analytic %.6e, numeric %.6e)\n", g.name.c_str(),
                    g.rel_err, g.analytic_at_worst, g.numeric_at_worst);
}

int run_gradcheck(const GradcheckArgs& a) {
    bool ok = true;
    for (int seed = 1; seed <= a.tiny_seeds; ++seed) {
        hdsi::NtcnGradCheckOptions opt;
        opt.seed = static_cast<std::uint64_t>(seed);
        opt.inject_fault = a.inject_fault;
        const auto rep = hdsi::gradcheck_ntcn(opt);
        print_gradcheck_report("ntcn tiny seed " + std::to_string(seed), rep, a.tol);
        ok = ok && rep.pass(a.tol);
    }
    if (a.full) {
        hdsi::NtcnGradCheckOptions opt;
        opt.config = hdsi::full_ntcn_config();
        opt.dims = hdsi::Dims{6, 5, 7};
        opt.seed = 1;
        opt.inject_fault = a.inject_fault;
        const auto rep = hdsi::gradcheck_ntcn(opt);
        print_gradcheck_report("ntcn full config", rep, a.tol);
        ok = ok && rep.pass(a.tol);
    }
    for (const auto loss : {hdsi::BaselineLoss::squared, hdsi::BaselineLoss::cauchy}) {
        hdsi::BaselineGradCheckOptions opt;
        opt.loss = loss;
        opt.gamma = 0.7;
        opt.inject_fault = a.inject_fault;
        const auto rt = hdsi::gradcheck_tucker(opt);
        print_gradcheck_report("tucker " + hdsi::to_string(loss), rt, a.tol);
        ok = ok && rt.pass(a.tol);
        const auto rc = hdsi::gradcheck_cp(opt);
        print_gradcheck_report("cp " + hdsi::to_string(loss), rc, a.tol);
        ok = ok && rc.pass(a.tol);
    }
    std::printf("gradcheck %s\n", ok ? "PASS" : "FAIL");
    return ok ? kExitOk : kExitVerifyFail;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sparse sensor-tensor imputation toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string("hds-impute ") + kToolVersion);

    SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "generate a synthetic sparse observation file");
    synth->add_option("--out", synth_args.out, "output COO path")->required();
    synth->add_option("--truth-out", synth_args.truth_out,
                      "ground-truth sidecar path (default: <out>.truth)");
    synth->add_option("--dims", synth_args.dims_text, "mode sizes as S,P,T")->required();
    synth->add_option("--rank", synth_args.rank, "ground-truth Tucker rank");
    synth->add_option("--density", synth_args.density, "observed fraction in (0,1]");
    synth->add_option("--noise", synth_args.noise, "Gaussian noise stddev on observed values");
    synth->add_option("--nonlinearity", synth_args.nonlinearity, "none | squash");
    synth->add_option("--seed", synth_args.seed, "RNG seed");

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "train a model and write checkpoint artifacts");
    train->add_option("--data", train_args.data, "COO observation file")->required();
    train->add_option("--out-dir", train_args.out_dir, "directory for artifacts");
    train->add_option("--config", train_args.config_file,
                      "JSON config file (defaults < file < flags)");
    train->add_option("--model", train_args.model, "ntcn | tucker | cp");
    train->add_option("--preprocess", train_args.preprocess, "sigmoid | minmax");
    train->add_option("--split", train_args.split_text, "ratio r1:r2:r3");
    train->add_option("--rank", train_args.rank, "embedding rank for all modes");
    train->add_option("--channels", train_args.channels_text, "conv channels c1,c2 (ntcn)");
    train->add_option("--kernels", train_args.kernels_text, "conv kernel sizes k1,k2 (ntcn)");
    train->add_option("--hidden", train_args.hidden, "MLP hidden width (ntcn)");
    train->add_option("--lambda", train_args.lambda, "L2 regularization weight");
    train->add_option("--optimizer", train_args.optimizer,
                      "sgd | adam (default: adam for ntcn, sgd otherwise)");
    train->add_option("--lr", train_args.lr, "learning rate (default 1e-3 adam, 0.01 sgd)");
    train->add_option("--beta1", train_args.beta1, "adam beta1");
    train->add_option("--beta2", train_args.beta2, "adam beta2");
    train->add_option("--adam-eps", train_args.adam_eps, "adam epsilon");
    train->add_option("--batch-size", train_args.batch_size, "gradient batch size");
    train->add_option("--epochs", train_args.epochs, "maximum training epochs");
    train->add_option("--early-stop-tol", train_args.early_stop_tol,
                      "stop when |E_t - E_{t-1}| is below this (<= 0 disables)");
    train->add_option("--seed", train_args.seed, "RNG seed");
    train->add_flag("--deterministic,!--no-deterministic", train_args.deterministic,
                    "keep emitted artifacts bit-reproducible");
    train->add_flag("--conv-bias,!--no-conv-bias", train_args.conv_bias,
                    "learn per-channel conv biases (ntcn)");
    train->add_flag("--snapshot-best,!--no-snapshot-best", train_args.snapshot_best,
                    "return best-validation parameters");
    train->add_option("--loss", train_args.loss, "squared | cauchy (baselines)");
    train->add_option("--gamma", train_args.gamma, "cauchy loss scale");
    train->add_option("--init-bound", train_args.init_bound, "embedding init upper bound");

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "score a checkpoint on a split part");
    eval->add_option("--checkpoint", eval_args.checkpoint, "checkpoint path")->required();
    eval->add_option("--data", eval_args.data, "COO observation file")->required();
    eval->add_option("--part", eval_args.part, "train | validation | test");
    eval->add_option("--json-out", eval_args.json_out, "write the report as JSON here");

    ImputeArgs impute_args;
    auto* impute = app.add_subcommand("impute", "write model predictions for tensor cells");
    impute->add_option("--checkpoint", impute_args.checkpoint, "checkpoint path")->required();
    impute->add_option("--out", impute_args.out, "output COO path")->required();
    impute->add_option("--data", impute_args.data, "observed COO file (for --missing-only)");
    impute->add_flag("--missing-only", impute_args.missing_only,
                     "write only cells absent from --data");
    impute->add_flag("--invert", impute_args.invert,
                     "map predictions back to the raw scale via the stored pipeline");

    GradcheckArgs grad_args;
    auto* gradcheck =
        app.add_subcommand("gradcheck", "finite-difference verification of every backward rule");
    gradcheck->add_option("--tiny-seeds", grad_args.tiny_seeds, "tiny-config seeds to run");
    gradcheck->add_option("--tol", grad_args.tol, "max relative error tolerance");
    gradcheck->add_flag("--full,!--no-full", grad_args.full, "include the full-size config");
    auto* fault = gradcheck->add_flag("--inject-fault", grad_args.inject_fault,
                                      "negative control: corrupt one analytic gradient");
    fault->group("");  // hidden from help

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (synth->parsed()) return run_synth(synth_args);
        if (train->parsed()) return run_train(train_args, train);
        if (eval->parsed()) return run_eval(eval_args);
        if (impute->parsed()) return run_impute(impute_args);
        if (gradcheck->parsed()) return run_gradcheck(grad_args);
    } catch (const hdsi::DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDiverged;
    } catch (const hdsi::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const hdsi::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const hdsi::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const hdsi::FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const hdsi::VersionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const hdsi::ShapeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitVerifyFail;
    }
    return kExitOk;
}
