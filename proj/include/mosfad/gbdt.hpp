#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mosfad/features.hpp"

namespace mosfad {

// Histogram gradient boosting with leaf-wise tree growth. Defaults are the
// binary/AUC configuration used for the tree fusion model.
struct GbdtConfig {
    std::string objective = "binary";
    std::string metric = "auc";
    int num_leaves = 16;
    int max_bin = 25;
    int max_depth = 4;
    double learning_rate = 0.1;
    int num_rounds = 100;
    int early_stopping_patience = 20;
    int min_data_in_leaf = 5;
    double lambda_l2 = 0.0;

    void validate() const;
    bool operator==(const GbdtConfig&) const = default;
};

nlohmann::json to_json(const GbdtConfig& cfg);
GbdtConfig gbdt_config_from_json(const nlohmann::json& j);

struct BinnedMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint16_t> bins;

    std::uint16_t at(std::size_t i, std::size_t j) const { return bins[i * cols + j]; }
};

// Per-feature cut points. Bin b of feature f holds values in
// (boundary[b-1], boundary[b]], so value <= boundary[t] <=> bin <= t.
class BinMapper {
public:
    BinMapper() = default;
    explicit BinMapper(std::vector<std::vector<double>> boundaries);

    std::size_t num_features() const { return boundaries_.size(); }
    std::size_t num_bins(std::size_t feature) const { return boundaries_[feature].size() + 1; }
    const std::vector<double>& boundaries(std::size_t feature) const { return boundaries_[feature]; }
    const std::vector<std::vector<double>>& all_boundaries() const { return boundaries_; }

    std::uint16_t bin(std::size_t feature, double value) const;
    BinnedMatrix bin_all(const FeatureMatrix& x) const;

private:
    std::vector<std::vector<double>> boundaries_;
};

// Equal-count cut points per feature, at most max_bin bins.
BinMapper build_bins(const FeatureMatrix& x, int max_bin);

struct SplitInfo {
    std::size_t feature = 0;
    std::size_t bin_threshold = 0;  // left child takes bins <= threshold
    double gain = 0.0;
    std::size_t left_count = 0;
    std::size_t right_count = 0;
};

// Second-order gain G_L^2/(H_L+l) + G_R^2/(H_R+l) - G^2/(H+l).
double split_gain(double g_left, double h_left, double g_right, double h_right, double lambda);

// Smallest gain accepted as positive for a node with the given totals; guards
// against rounding noise on nodes whose true gain is zero.
double min_split_gain(double g_total, double h_total, double lambda);

// Best split over all histogram boundaries of all features for the node's
// rows. Ties go to the lowest feature index, then the lowest threshold.
std::optional<SplitInfo> find_best_split(std::span<const std::size_t> rows, const BinnedMatrix& bins,
                                         const BinMapper& mapper, std::span<const double> grad,
                                         std::span<const double> hess, const GbdtConfig& cfg);

struct TreeNode {
    int feature = -1;  // -1 for leaves
    std::size_t bin_threshold = 0;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
    std::size_t count = 0;  // training rows that reached this node

    bool is_leaf() const { return feature < 0; }
    bool operator==(const TreeNode&) const = default;
};

// Nodes stored in pre-order; the root is node 0.
struct Tree {
    std::vector<TreeNode> nodes;

    double predict(std::span<const double> x) const;
    std::size_t leaf_count() const;
    std::size_t depth() const;
    bool operator==(const Tree&) const = default;
};

// One leaf-wise expansion: the chosen node's gain and the best gain among the
// other splittable frontier leaves at that moment (-inf when it had none).
struct GrowthStep {
    double gain = 0.0;
    double best_other_gain = 0.0;
};

struct GrownTree {
    Tree tree;
    std::vector<GrowthStep> trace;
};

GrownTree grow_tree(std::span<const std::size_t> rows, const BinnedMatrix& bins,
                    const BinMapper& mapper, std::span<const double> grad,
                    std::span<const double> hess, const GbdtConfig& cfg);

struct TreeEnsemble {
    GbdtConfig config;
    std::size_t num_features = 0;
    std::vector<std::vector<double>> bin_boundaries;
    double base_score = 0.0;  // log-odds of the training prior
    std::vector<Tree> trees;

    bool operator==(const TreeEnsemble&) const = default;
};

double gbdt_margin(const TreeEnsemble& ens, std::span<const double> x);
double gbdt_predict(const TreeEnsemble& ens, std::span<const double> x);
std::vector<double> gbdt_predict_batch(const TreeEnsemble& ens, const FeatureMatrix& x);

struct RoundLog {
    std::size_t round = 0;
    double train_logloss = 0.0;
    double valid_auc = 0.0;
};

struct GbdtTrainResult {
    TreeEnsemble ensemble;  // truncated to the best validation-AUC prefix
    std::vector<RoundLog> history;
    std::size_t best_round = 0;
    std::vector<std::vector<GrowthStep>> traces;
};

// Targets: 1 bonafide, 0 spoof. Throws ValidationError when the training set
// is empty or single-class.
GbdtTrainResult train_gbdt(const FeatureMatrix& train_x, std::span<const double> train_y,
                           const FeatureMatrix& valid_x, std::span<const double> valid_y,
                           const GbdtConfig& cfg);

nlohmann::json to_json(const TreeEnsemble& ens);
TreeEnsemble ensemble_from_json(const nlohmann::json& j);

}  // namespace mosfad
