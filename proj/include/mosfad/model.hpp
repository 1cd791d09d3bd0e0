#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "mosfad/features.hpp"
#include "mosfad/fusion_models.hpp"
#include "mosfad/gbdt.hpp"
#include "mosfad/score_data.hpp"

namespace mosfad {

struct MlpModel {
    FeatureSet features = FeatureSet::fad;
    MlpParams params;
};

struct GatedMlpModel {
    GateInput gate_input = GateInput::fused;
    GatedMlpParams params;
};

struct MosFuserModel {
    MosFuserParams params;
};

struct GbdtModel {
    FeatureSet features = FeatureSet::fad_fused;
    TreeEnsemble ensemble;
};

using BaseModel = std::variant<MlpModel, GatedMlpModel, MosFuserModel, GbdtModel>;

// A trained fusion model, optionally wrapped by MOS thresholding, plus the
// provenance needed to reproduce it.
struct FusionModel {
    BaseModel base;
    std::optional<ThresholdConfig> threshold;
    std::uint64_t init_seed = 0;
    nlohmann::json train_config = nlohmann::json::object();
};

std::string_view model_type(const FusionModel& model);

// Raw outputs of the base model, one per record in order. For the MOS fuser
// these are fused MOS values in [0,5]; otherwise bonafide scores in (0,1).
std::vector<double> predict_base(const FusionModel& model, const Dataset& ds);

// predict_base followed by apply_threshold on each record's mos_fused when the
// model carries a threshold.
std::vector<double> predict_batch(const FusionModel& model, const Dataset& ds);

FusionModel with_threshold(FusionModel model, const ThresholdConfig& cfg);

nlohmann::json to_json(const FusionModel& model);
FusionModel model_from_json(const nlohmann::json& j);
void save_model(const FusionModel& model, const std::filesystem::path& path);
FusionModel load_model(const std::filesystem::path& path);

// FNV-1a of the compact JSON dump, hex encoded.
std::string fingerprint(const nlohmann::json& j);

}  // namespace mosfad
