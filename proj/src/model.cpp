#include "mosfad/model.hpp"

#include <cstdio>

#include "mosfad/error.hpp"
#include "mosfad/io_util.hpp"

namespace mosfad {

using nlohmann::json;

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require_fad_dim(const Dataset& ds, std::size_t want) {
    if (!ds.empty() && ds.fad_dim() != want) {
        throw ValidationError("dataset FAD dimension " + std::to_string(ds.fad_dim()) +
                              " does not match model (" + std::to_string(want) + ")");
    }
}

void require_cols(const FeatureMatrix& m, std::size_t want, const char* what) {
    if (m.rows > 0 && m.cols != want) {
        throw ValidationError(std::string(what) + " dimension " + std::to_string(m.cols) +
                              " does not match model (" + std::to_string(want) + ")");
    }
}

json mlp_weights(const MlpParams& p) {
    json w;
    w["w1"] = p.w1;
    w["w2"] = p.w2;
    w["b2"] = p.b2;
    return w;
}

MlpParams mlp_from(const json& dims, const json& w) {
    MlpParams p = MlpParams::zeros(dims.at("in_dim").get<std::size_t>(),
                                   dims.at("hidden_dim").get<std::size_t>());
    p.w1 = w.at("w1").get<std::vector<double>>();
    p.w2 = w.at("w2").get<std::vector<double>>();
    p.b2 = w.at("b2").get<double>();
    if (p.w1.size() != p.in_dim * p.hidden_dim || p.w2.size() != p.hidden_dim) {
        throw ValidationError("MLP weight arrays do not match declared dimensions");
    }
    return p;
}

}  // namespace

std::string_view model_type(const FusionModel& model) {
    return std::visit(Overloaded{
                          [](const MlpModel&) { return std::string_view("mlp"); },
                          [](const GatedMlpModel&) { return std::string_view("gated-mlp"); },
                          [](const MosFuserModel&) { return std::string_view("mos-fuser"); },
                          [](const GbdtModel&) { return std::string_view("gbdt"); },
                      },
                      model.base);
}

std::vector<double> predict_base(const FusionModel& model, const Dataset& ds) {
    std::vector<double> out;
    out.reserve(ds.size());
    std::visit(Overloaded{
                   [&](const MlpModel& m) {
                       const auto x = feature_matrix(ds, m.features);
                       require_cols(x, m.params.in_dim, "feature");
                       for (std::size_t i = 0; i < x.rows; ++i) out.push_back(mlp_forward(m.params, x.row(i)));
                   },
                   [&](const GatedMlpModel& m) {
                       require_fad_dim(ds, m.params.fad_dim);
                       const auto fad = fad_matrix(ds);
                       const auto gate = gate_matrix(ds, m.gate_input);
                       require_cols(gate, m.params.gate_dim, "gate input");
                       for (std::size_t i = 0; i < fad.rows; ++i) {
                           out.push_back(gated_mlp_forward(m.params, fad.row(i), gate.row(i)).score);
                       }
                   },
                   [&](const MosFuserModel& m) {
                       const auto mos = mos_matrix(ds);
                       require_cols(mos, m.params.w.size(), "MOS");
                       for (std::size_t i = 0; i < mos.rows; ++i) {
                           out.push_back(mos_fuser_forward(m.params, mos.row(i)));
                       }
                   },
                   [&](const GbdtModel& m) {
                       const auto x = feature_matrix(ds, m.features);
                       require_cols(x, m.ensemble.num_features, "feature");
                       out = gbdt_predict_batch(m.ensemble, x);
                   },
               },
               model.base);
    return out;
}

std::vector<double> predict_batch(const FusionModel& model, const Dataset& ds) {
    if (model.threshold && std::holds_alternative<MosFuserModel>(model.base)) {
        throw ValidationError("thresholding does not apply to the MOS fuser");
    }
    auto scores = predict_base(model, ds);
    if (model.threshold) {
        for (std::size_t i = 0; i < ds.size(); ++i) {
            scores[i] = apply_threshold(*model.threshold, fused_mos(ds[i]), scores[i]);
        }
    }
    return scores;
}

FusionModel with_threshold(FusionModel model, const ThresholdConfig& cfg) {
    cfg.validate();
    if (std::holds_alternative<MosFuserModel>(model.base)) {
        throw ValidationError("thresholding does not apply to the MOS fuser");
    }
    model.threshold = cfg;
    return model;
}

std::string fingerprint(const json& j) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : j.dump()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

json to_json(const FusionModel& model) {
    json j;
    j["format"] = "mosfad-model";
    j["version"] = 1;
    j["model_type"] = std::string(model_type(model));
    std::visit(Overloaded{
                   [&](const MlpModel& m) {
                       j["features"] = std::string(to_string(m.features));
                       j["dims"] = {{"in_dim", m.params.in_dim}, {"hidden_dim", m.params.hidden_dim}};
                       j["weights"] = mlp_weights(m.params);
                   },
                   [&](const GatedMlpModel& m) {
                       j["gate_input"] = std::string(to_string(m.gate_input));
                       j["dims"] = {{"fad_dim", m.params.fad_dim},
                                    {"gate_dim", m.params.gate_dim},
                                    {"in_dim", m.params.inner.in_dim},
                                    {"hidden_dim", m.params.inner.hidden_dim}};
                       json w = mlp_weights(m.params.inner);
                       w["wd"] = m.params.wd;
                       w["bd"] = m.params.bd;
                       j["weights"] = std::move(w);
                   },
                   [&](const MosFuserModel& m) {
                       j["dims"] = {{"mos_dim", m.params.w.size()}};
                       j["weights"] = {{"w", m.params.w}, {"a", m.params.a}, {"b", m.params.b}};
                   },
                   [&](const GbdtModel& m) {
                       j["features"] = std::string(to_string(m.features));
                       j["dims"] = {{"num_features", m.ensemble.num_features}};
                       j["ensemble"] = to_json(m.ensemble);
                   },
               },
               model.base);
    j["threshold"] = model.threshold ? json{{"m1", model.threshold->m1}, {"m2", model.threshold->m2}}
                                     : json(nullptr);
    j["init_seed"] = model.init_seed;
    j["train_config"] = model.train_config;
    j["train_config_fingerprint"] = fingerprint(model.train_config);
    return j;
}

FusionModel model_from_json(const json& j) {
    FusionModel model;
    try {
        if (j.value("format", std::string()) != "mosfad-model") {
            throw ValidationError("not a mosfad model file");
        }
        const auto type = j.at("model_type").get<std::string>();
        if (type == "mlp") {
            MlpModel m;
            m.features = parse_feature_set(j.at("features").get<std::string>());
            m.params = mlp_from(j.at("dims"), j.at("weights"));
            model.base = std::move(m);
        } else if (type == "gated-mlp") {
            GatedMlpModel m;
            m.gate_input = parse_gate_input(j.at("gate_input").get<std::string>());
            const auto& dims = j.at("dims");
            const auto& w = j.at("weights");
            m.params = GatedMlpParams::zeros(dims.at("fad_dim").get<std::size_t>(),
                                             dims.at("gate_dim").get<std::size_t>(),
                                             dims.at("hidden_dim").get<std::size_t>());
            m.params.inner = mlp_from(dims, w);
            m.params.wd = w.at("wd").get<std::vector<double>>();
            m.params.bd = w.at("bd").get<std::vector<double>>();
            if (m.params.inner.in_dim != m.params.fad_dim ||
                m.params.wd.size() != m.params.fad_dim * m.params.gate_dim ||
                m.params.bd.size() != m.params.fad_dim) {
                throw ValidationError("gated MLP weight arrays do not match declared dimensions");
            }
            model.base = std::move(m);
        } else if (type == "mos-fuser") {
            MosFuserModel m;
            const auto& w = j.at("weights");
            m.params.w = w.at("w").get<std::vector<double>>();
            m.params.a = w.at("a").get<double>();
            m.params.b = w.at("b").get<double>();
            if (m.params.w.empty()) throw ValidationError("MOS fuser has no weights");
            model.base = std::move(m);
        } else if (type == "gbdt") {
            GbdtModel m;
            m.features = parse_feature_set(j.at("features").get<std::string>());
            m.ensemble = ensemble_from_json(j.at("ensemble"));
            model.base = std::move(m);
        } else {
            throw ValidationError("unknown model_type '" + type + "'");
        }
        if (auto it = j.find("threshold"); it != j.end() && !it->is_null()) {
            ThresholdConfig t{it->at("m1").get<double>(), it->at("m2").get<double>()};
            t.validate();
            model.threshold = t;
        }
        model.init_seed = j.value("init_seed", std::uint64_t{0});
        model.train_config = j.value("train_config", json::object());
    } catch (const json::exception& e) {
        throw ValidationError(std::string("invalid model JSON: ") + e.what());
    }
    return model;
}

void save_model(const FusionModel& model, const std::filesystem::path& path) {
    write_file(path, to_json(model).dump(1) + "\n");
}

FusionModel load_model(const std::filesystem::path& path) {
    const auto text = read_file(path);
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(path.string() + ": malformed JSON: " + e.what());
    }
    return model_from_json(j);
}

}  // namespace mosfad
