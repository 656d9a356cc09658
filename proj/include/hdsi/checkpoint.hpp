#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "hdsi/baselines.hpp"
#include "hdsi/ntcn.hpp"
#include "hdsi/preprocess.hpp"
#include "hdsi/split.hpp"

namespace hdsi {

inline constexpr const char* kCheckpointFormat = "hds-impute/checkpoint";
inline constexpr int kCheckpointVersion = 1;

// How the training data was transformed and partitioned. Evaluation and
// imputation replay this to land in the same scale and on the same split.
struct PipelineInfo {
    PreprocessKind preprocess = PreprocessKind::sigmoid;
    std::optional<ScaleRecord> minmax;  // present iff preprocess == minmax
    SplitRatio ratio{1.0, 2.0, 7.0};
    std::uint64_t seed = 1;
};

struct LoadedCheckpoint {
    std::variant<NtcnModel, TuckerModel, CpModel> model;
    PipelineInfo pipeline;
};

namespace detail {

inline nlohmann::json blocks_to_json(const std::vector<ParamBlock>& blocks) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& b : blocks) {
        nlohmann::json shape = nlohmann::json::array();
        for (auto d : b.shape) shape.push_back(d);
        nlohmann::json values = nlohmann::json::array();
        for (std::size_t i = 0; i < b.size; ++i) values.push_back(b.data[i]);
        out[b.name] = nlohmann::json{{"shape", std::move(shape)}, {"values", std::move(values)}};
    }
    return out;
}

inline void blocks_from_json(const nlohmann::json& j, std::vector<ParamBlock> blocks) {
    for (auto& b : blocks) {
        if (!j.contains(b.name))
            throw FormatError("checkpoint: missing parameter block '" + b.name + "'");
        const auto& jb = j.at(b.name);
        const auto& shape = jb.at("shape");
        if (shape.size() != b.shape.size())
            throw ShapeError("checkpoint: block '" + b.name + "' has rank " +
                             std::to_string(shape.size()) + ", expected " +
                             std::to_string(b.shape.size()));
        for (std::size_t i = 0; i < b.shape.size(); ++i)
            if (shape.at(i).get<std::size_t>() != b.shape[i])
                throw ShapeError("checkpoint: block '" + b.name + "' axis " + std::to_string(i) +
                                 " is " + shape.at(i).dump() + ", expected " +
                                 std::to_string(b.shape[i]));
        const auto& values = jb.at("values");
        if (values.size() != b.size)
            throw ShapeError("checkpoint: block '" + b.name + "' has " +
                             std::to_string(values.size()) + " values, expected " +
                             std::to_string(b.size));
        for (std::size_t i = 0; i < b.size; ++i) b.data[i] = values.at(i).get<double>();
    }
}

inline nlohmann::json pipeline_to_json(const PipelineInfo& p) {
    nlohmann::json j;
    j["preprocess"] = to_string(p.preprocess);
    if (p.minmax.has_value())
        j["minmax"] = nlohmann::json{{"min", p.minmax->min},
                                     {"max", p.minmax->max},
                                     {"degenerate", p.minmax->degenerate}};
    else
        j["minmax"] = nullptr;
    j["split"] = nlohmann::json{
        {"train", p.ratio.r1}, {"validation", p.ratio.r2}, {"test", p.ratio.r3}};
    j["seed"] = p.seed;
    return j;
}

inline PipelineInfo pipeline_from_json(const nlohmann::json& j) {
    PipelineInfo p;
    p.preprocess = preprocess_from_string(j.at("preprocess").get<std::string>());
    if (j.contains("minmax") && !j.at("minmax").is_null()) {
        const auto& m = j.at("minmax");
        ScaleRecord rec;
        rec.min = m.at("min").get<double>();
        rec.max = m.at("max").get<double>();
        rec.degenerate = m.at("degenerate").get<bool>();
        p.minmax = rec;
    }
    const auto& s = j.at("split");
    p.ratio = SplitRatio{s.at("train").get<double>(), s.at("validation").get<double>(),
                         s.at("test").get<double>()};
    p.seed = j.at("seed").get<std::uint64_t>();
    return p;
}

inline nlohmann::json dims_to_json(const Dims& d) {
    return nlohmann::json{
        {"stations", d.stations}, {"indicators", d.indicators}, {"times", d.times}};
}

inline Dims dims_from_json(const nlohmann::json& j) {
    return Dims{j.at("stations").get<int>(), j.at("indicators").get<int>(),
                j.at("times").get<int>()};
}

inline nlohmann::json envelope(const char* model_kind, const Dims& dims,
                               nlohmann::json config, const PipelineInfo& pipeline,
                               nlohmann::json params) {
    nlohmann::json j;
    j["format"] = kCheckpointFormat;
    j["version"] = kCheckpointVersion;
    j["model"] = model_kind;
    j["dims"] = dims_to_json(dims);
    j["config"] = std::move(config);
    j["pipeline"] = pipeline_to_json(pipeline);
    j["params"] = std::move(params);
    return j;
}

}  // namespace detail

inline nlohmann::json checkpoint_to_json(NtcnModel& model, const PipelineInfo& pipeline) {
    nlohmann::json cfg;
    cfg["rank_n"] = model.config.rank_n;
    cfg["rank_m"] = model.config.rank_m;
    cfg["rank_k"] = model.config.rank_k;
    cfg["c1"] = model.config.c1;
    cfg["c2"] = model.config.c2;
    cfg["k1"] = model.config.k1;
    cfg["k2"] = model.config.k2;
    cfg["h1"] = model.config.h1;
    cfg["lambda"] = model.config.lambda;
    cfg["init_bound"] = model.config.init_bound;
    cfg["conv_bias"] = model.config.conv_bias;
    cfg["eps"] = model.config.eps;
    cfg["seed"] = model.config.seed;
    return detail::envelope(NtcnModel::kind(), model.dims, std::move(cfg), pipeline,
                            detail::blocks_to_json(model.blocks()));
}

inline nlohmann::json checkpoint_to_json(TuckerModel& model, const PipelineInfo& pipeline) {
    nlohmann::json cfg;
    cfg["rank_n"] = model.rank_n;
    cfg["rank_m"] = model.rank_m;
    cfg["rank_k"] = model.rank_k;
    cfg["loss"] = to_string(model.loss);
    cfg["gamma"] = model.gamma;
    return detail::envelope(TuckerModel::kind(), model.dims, std::move(cfg), pipeline,
                            detail::blocks_to_json(model.blocks()));
}

inline nlohmann::json checkpoint_to_json(CpModel& model, const PipelineInfo& pipeline) {
    nlohmann::json cfg;
    cfg["rank"] = model.rank;
    cfg["loss"] = to_string(model.loss);
    cfg["gamma"] = model.gamma;
    return detail::envelope(CpModel::kind(), model.dims, std::move(cfg), pipeline,
                            detail::blocks_to_json(model.blocks()));
}

template <typename Model>
void save_checkpoint(const std::string& path, Model& model, const PipelineInfo& pipeline) {
    const nlohmann::json j = checkpoint_to_json(model, pipeline);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << j.dump(2) << '\n';
    if (!out) throw IoError("short write to '" + path + "'");
}

inline LoadedCheckpoint checkpoint_from_json(const nlohmann::json& j) {
    try {
        if (!j.is_object() || !j.contains("format") || !j.at("format").is_string())
            throw FormatError("checkpoint: missing format marker");
        if (j.at("format").get<std::string>() != kCheckpointFormat)
            throw FormatError("checkpoint: unexpected format '" +
                              j.at("format").get<std::string>() + "'");
        if (!j.contains("version") || !j.at("version").is_number_integer())
            throw FormatError("checkpoint: missing version");
        if (j.at("version").get<int>() != kCheckpointVersion)
            throw VersionError("checkpoint: version " + std::to_string(j.at("version").get<int>()) +
                               " is not supported (expected " +
                               std::to_string(kCheckpointVersion) + ")");

        const auto model_kind = j.at("model").get<std::string>();
        const Dims dims = detail::dims_from_json(j.at("dims"));
        const PipelineInfo pipeline = detail::pipeline_from_json(j.at("pipeline"));
        const auto& cfg = j.at("config");
        const auto& params = j.at("params");

        if (model_kind == "ntcn") {
            NtcnConfig c;
            c.rank_n = cfg.at("rank_n").get<int>();
            c.rank_m = cfg.at("rank_m").get<int>();
            c.rank_k = cfg.at("rank_k").get<int>();
            c.c1 = cfg.at("c1").get<int>();
            c.c2 = cfg.at("c2").get<int>();
            c.k1 = cfg.at("k1").get<int>();
            c.k2 = cfg.at("k2").get<int>();
            c.h1 = cfg.at("h1").get<int>();
            c.lambda = cfg.at("lambda").get<double>();
            c.init_bound = cfg.at("init_bound").get<double>();
            c.conv_bias = cfg.at("conv_bias").get<bool>();
            c.eps = cfg.at("eps").get<double>();
            c.seed = cfg.at("seed").get<std::uint64_t>();
            NtcnModel model = NtcnModel::init(c, dims, c.seed);
            detail::blocks_from_json(params, model.blocks());
            return LoadedCheckpoint{std::move(model), pipeline};
        }
        if (model_kind == "tucker") {
            TuckerModel model;
            model.dims = dims;
            model.rank_n = cfg.at("rank_n").get<int>();
            model.rank_m = cfg.at("rank_m").get<int>();
            model.rank_k = cfg.at("rank_k").get<int>();
            model.loss = baseline_loss_from_string(cfg.at("loss").get<std::string>());
            model.gamma = cfg.at("gamma").get<double>();
            model.params = tucker_init(dims, model.rank_n, model.rank_m, model.rank_k, 0);
            detail::blocks_from_json(params, model.blocks());
            return LoadedCheckpoint{std::move(model), pipeline};
        }
        if (model_kind == "cp") {
            CpModel model;
            model.dims = dims;
            model.rank = cfg.at("rank").get<int>();
            model.loss = baseline_loss_from_string(cfg.at("loss").get<std::string>());
            model.gamma = cfg.at("gamma").get<double>();
            model.params = cp_init(dims, model.rank, 0);
            detail::blocks_from_json(params, model.blocks());
            return LoadedCheckpoint{std::move(model), pipeline};
        }
        throw FormatError("checkpoint: unknown model kind '" + model_kind + "'");
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint: malformed document: ") + e.what());
    }
}

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("checkpoint '" + path + "' is not valid JSON: " + e.what());
    }
    return checkpoint_from_json(j);
}

}  // namespace hdsi
