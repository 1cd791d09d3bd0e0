#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mosfad/features.hpp"
#include "mosfad/gbdt.hpp"
#include "mosfad/model.hpp"
#include "mosfad/score_data.hpp"

namespace mosfad {

struct TrainConfig {
    double learning_rate = 0.001;
    std::size_t batch_size = 64;
    std::size_t max_epochs = 1000;
    std::size_t patience = 20;
    std::uint64_t seed = 0;
    bool shuffle = true;

    void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);

struct EpochLog {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double valid_loss = 0.0;
};

struct TrainHistory {
    std::vector<EpochLog> epochs;
    std::size_t best_epoch = 0;
    std::size_t stopped_epoch = 0;
};

std::string history_csv(const TrainHistory& h);
nlohmann::json to_json(const TrainHistory& h);

enum class ModelKind { mlp, gated_mlp, mos_fuser };

struct ModelSpec {
    ModelKind kind = ModelKind::mlp;
    FeatureSet features = FeatureSet::fad;    // mlp only
    GateInput gate_input = GateInput::fused;  // gated_mlp only
    std::size_t hidden_dim = 3;
    // Hidden width becomes half the input dimension (embedding fusion).
    bool embedding_mode = false;
    // mos_fuser: regress onto mos_fused snapped to the quantization grid.
    bool quantize_targets = false;
    double quantize_step = 0.125;
};

std::size_t resolve_hidden_dim(const ModelSpec& spec, std::size_t in_dim);
nlohmann::json to_json(const ModelSpec& spec);

// -[y ln p + (1-y) ln(1-p)] with p clamped to [1e-12, 1-1e-12].
double bce_loss(double pred, double label);

struct TrainResult {
    FusionModel model;  // parameters snapshot from the best validation epoch
    TrainHistory history;
};

// Minibatch SGD with per-epoch seeded shuffling. Stops once the validation
// loss has gone `patience` epochs without a new strict minimum.
TrainResult train_model(const ModelSpec& spec, const Dataset& train, const Dataset& valid,
                        const TrainConfig& cfg);

struct GbdtTrainOutput {
    FusionModel model;
    GbdtTrainResult result;
};

GbdtTrainOutput train_gbdt_model(const Dataset& train, const Dataset& valid, FeatureSet features,
                                 const GbdtConfig& cfg);

// Analytic versus central-difference gradients. Relative error per parameter
// is |a - n| / max(|a|, |n|); parameters where both are below abs_floor only
// contribute to max_abs_error.
struct GradCheckResult {
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    std::size_t n_params = 0;
};

GradCheckResult grad_check(const MlpParams& p, std::span<const double> x, double target,
                           double eps = 1e-4, double abs_floor = 1e-7);
GradCheckResult grad_check(const GatedMlpParams& p, std::span<const double> fad,
                           std::span<const double> mos, double target, double eps = 1e-4,
                           double abs_floor = 1e-7);
GradCheckResult grad_check(const MosFuserParams& p, std::span<const double> mos, double target,
                           double eps = 1e-4, double abs_floor = 1e-7);

}  // namespace mosfad
