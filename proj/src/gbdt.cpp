#include "mosfad/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mosfad/error.hpp"
#include "mosfad/fusion_models.hpp"
#include "mosfad/metrics.hpp"

namespace mosfad {

void GbdtConfig::validate() const {
    if (objective != "binary") throw ValidationError("gbdt objective must be 'binary'");
    if (metric != "auc") throw ValidationError("gbdt metric must be 'auc'");
    if (num_leaves < 2) throw ValidationError("num_leaves must be >= 2");
    if (max_depth < 1) throw ValidationError("max_depth must be >= 1");
    if (max_bin < 2 || max_bin > 65535) throw ValidationError("max_bin must be in [2, 65535]");
    if (!(learning_rate > 0.0 && learning_rate <= 1.0)) {
        throw ValidationError("learning_rate must be in (0, 1]");
    }
    if (num_rounds < 0) throw ValidationError("num_rounds must be >= 0");
    if (early_stopping_patience < 1) throw ValidationError("early_stopping_patience must be >= 1");
    if (min_data_in_leaf < 1) throw ValidationError("min_data_in_leaf must be >= 1");
    if (lambda_l2 < 0.0) throw ValidationError("lambda_l2 must be >= 0");
}

nlohmann::json to_json(const GbdtConfig& cfg) {
    nlohmann::json j;
    j["objective"] = cfg.objective;
    j["metric"] = cfg.metric;
    j["num_leaves"] = cfg.num_leaves;
    j["max_bin"] = cfg.max_bin;
    j["max_depth"] = cfg.max_depth;
    j["learning_rate"] = cfg.learning_rate;
    j["num_rounds"] = cfg.num_rounds;
    j["early_stopping_patience"] = cfg.early_stopping_patience;
    j["min_data_in_leaf"] = cfg.min_data_in_leaf;
    j["lambda_l2"] = cfg.lambda_l2;
    return j;
}

GbdtConfig gbdt_config_from_json(const nlohmann::json& j) {
    GbdtConfig cfg;
    try {
        cfg.objective = j.value("objective", cfg.objective);
        cfg.metric = j.value("metric", cfg.metric);
        cfg.num_leaves = j.value("num_leaves", cfg.num_leaves);
        cfg.max_bin = j.value("max_bin", cfg.max_bin);
        cfg.max_depth = j.value("max_depth", cfg.max_depth);
        cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
        cfg.num_rounds = j.value("num_rounds", cfg.num_rounds);
        cfg.early_stopping_patience = j.value("early_stopping_patience", cfg.early_stopping_patience);
        cfg.min_data_in_leaf = j.value("min_data_in_leaf", cfg.min_data_in_leaf);
        cfg.lambda_l2 = j.value("lambda_l2", cfg.lambda_l2);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("invalid gbdt config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

// ---------------------------------------------------------------------------
// Binning

BinMapper::BinMapper(std::vector<std::vector<double>> boundaries)
    : boundaries_(std::move(boundaries)) {
    for (const auto& b : boundaries_) {
        for (std::size_t i = 1; i < b.size(); ++i) {
            if (!(b[i - 1] < b[i])) {
                throw ValidationError("bin boundaries must be strictly increasing");
            }
        }
    }
}

std::uint16_t BinMapper::bin(std::size_t feature, double value) const {
    const auto& b = boundaries_[feature];
    return static_cast<std::uint16_t>(std::lower_bound(b.begin(), b.end(), value) - b.begin());
}

BinnedMatrix BinMapper::bin_all(const FeatureMatrix& x) const {
    if (x.cols != num_features()) {
        throw ValidationError("feature count " + std::to_string(x.cols) +
                              " does not match bin mapper (" + std::to_string(num_features()) + ")");
    }
    BinnedMatrix out;
    out.rows = x.rows;
    out.cols = x.cols;
    out.bins.resize(x.rows * x.cols);
    for (std::size_t i = 0; i < x.rows; ++i) {
        for (std::size_t j = 0; j < x.cols; ++j) out.bins[i * x.cols + j] = bin(j, x.at(i, j));
    }
    return out;
}

namespace {

double cut_between(double lo, double hi) {
    double mid = lo + (hi - lo) / 2.0;
    return mid < hi ? mid : lo;
}

}  // namespace

BinMapper build_bins(const FeatureMatrix& x, int max_bin) {
    if (max_bin < 2) throw ValidationError("max_bin must be >= 2");
    std::vector<std::vector<double>> all(x.cols);
    std::vector<double> column(x.rows);
    const auto bins = static_cast<std::size_t>(max_bin);
    for (std::size_t j = 0; j < x.cols; ++j) {
        for (std::size_t i = 0; i < x.rows; ++i) column[i] = x.at(i, j);
        std::sort(column.begin(), column.end());
        std::vector<double> distinct;
        for (double v : column) {
            if (distinct.empty() || distinct.back() != v) distinct.push_back(v);
        }
        auto& cuts = all[j];
        if (distinct.size() <= bins) {
            for (std::size_t k = 1; k < distinct.size(); ++k) {
                cuts.push_back(cut_between(distinct[k - 1], distinct[k]));
            }
        } else {
            const std::size_t n = column.size();
            for (std::size_t k = 1; k < bins; ++k) {
                const std::size_t idx = k * n / bins;
                if (idx == 0 || idx >= n || column[idx - 1] == column[idx]) continue;
                double c = cut_between(column[idx - 1], column[idx]);
                if (cuts.empty() || cuts.back() < c) cuts.push_back(c);
            }
        }
    }
    return BinMapper(std::move(all));
}

// ---------------------------------------------------------------------------
// Split finding

double split_gain(double g_left, double h_left, double g_right, double h_right, double lambda) {
    const double g = g_left + g_right;
    const double h = h_left + h_right;
    return g_left * g_left / (h_left + lambda) + g_right * g_right / (h_right + lambda) -
           g * g / (h + lambda);
}

double min_split_gain(double g_total, double h_total, double lambda) {
    const double parent = h_total + lambda > 0.0 ? g_total * g_total / (h_total + lambda) : 0.0;
    return 1e-10 * (1.0 + std::abs(parent));
}

std::optional<SplitInfo> find_best_split(std::span<const std::size_t> rows, const BinnedMatrix& bins,
                                         const BinMapper& mapper, std::span<const double> grad,
                                         std::span<const double> hess, const GbdtConfig& cfg) {
    const auto min_leaf = static_cast<std::size_t>(cfg.min_data_in_leaf);
    if (rows.size() < 2 * min_leaf) return std::nullopt;

    double g_total = 0.0;
    double h_total = 0.0;
    for (std::size_t r : rows) {
        g_total += grad[r];
        h_total += hess[r];
    }
    const double lambda = cfg.lambda_l2;
    std::optional<SplitInfo> best;
    double best_gain = min_split_gain(g_total, h_total, lambda);

    std::vector<double> hg, hh;
    std::vector<std::size_t> hc;
    for (std::size_t f = 0; f < bins.cols; ++f) {
        const std::size_t nb = mapper.num_bins(f);
        if (nb < 2) continue;
        hg.assign(nb, 0.0);
        hh.assign(nb, 0.0);
        hc.assign(nb, 0);
        for (std::size_t r : rows) {
            const auto b = bins.at(r, f);
            hg[b] += grad[r];
            hh[b] += hess[r];
            ++hc[b];
        }
        double gl = 0.0;
        double hl = 0.0;
        std::size_t cl = 0;
        for (std::size_t t = 0; t + 1 < nb; ++t) {
            gl += hg[t];
            hl += hh[t];
            cl += hc[t];
            const std::size_t cr = rows.size() - cl;
            if (cl < min_leaf) continue;
            if (cr < min_leaf) break;
            const double gr = g_total - gl;
            const double hr = h_total - hl;
            if (!(hl + lambda > 0.0) || !(hr + lambda > 0.0)) continue;
            const double gain = split_gain(gl, hl, gr, hr, lambda);
            if (gain > best_gain) {
                best_gain = gain;
                best = SplitInfo{f, t, gain, cl, cr};
            }
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Trees

double Tree::predict(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
        const auto& n = nodes[i];
        i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left
                                                                                         : n.right);
    }
    return nodes[i].value;
}

std::size_t Tree::leaf_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

std::size_t Tree::depth() const {
    if (nodes.empty()) return 0;
    std::vector<std::size_t> d(nodes.size(), 0);
    std::size_t deepest = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        deepest = std::max(deepest, d[i]);
        if (!nodes[i].is_leaf()) {
            d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
            d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
        }
    }
    return deepest;
}

namespace {

struct Frontier {
    std::size_t node;
    std::size_t depth;
    std::vector<std::size_t> rows;
    std::optional<SplitInfo> split;
};

void preorder(const std::vector<TreeNode>& in, std::size_t i, std::vector<TreeNode>& out) {
    const std::size_t at = out.size();
    out.push_back(in[i]);
    if (in[i].is_leaf()) return;
    preorder(in, static_cast<std::size_t>(in[i].left), out);
    out[at].left = static_cast<int>(at + 1);
    out[at].right = static_cast<int>(out.size());
    preorder(in, static_cast<std::size_t>(in[i].right), out);
}

}  // namespace

GrownTree grow_tree(std::span<const std::size_t> rows, const BinnedMatrix& bins,
                    const BinMapper& mapper, std::span<const double> grad,
                    std::span<const double> hess, const GbdtConfig& cfg) {
    GrownTree out;
    std::vector<TreeNode> nodes(1);
    nodes[0].count = rows.size();

    auto candidate = [&](const std::vector<std::size_t>& r, std::size_t depth) {
        return depth < static_cast<std::size_t>(cfg.max_depth)
                   ? find_best_split(r, bins, mapper, grad, hess, cfg)
                   : std::nullopt;
    };

    std::vector<Frontier> frontier;
    frontier.push_back({0, 0, std::vector<std::size_t>(rows.begin(), rows.end()), std::nullopt});
    frontier[0].split = candidate(frontier[0].rows, 0);

    std::size_t leaves = 1;
    while (leaves < static_cast<std::size_t>(cfg.num_leaves)) {
        std::size_t pick = frontier.size();
        for (std::size_t i = 0; i < frontier.size(); ++i) {
            if (!frontier[i].split) continue;
            if (pick == frontier.size() || frontier[i].split->gain > frontier[pick].split->gain) pick = i;
        }
        if (pick == frontier.size()) break;

        GrowthStep step{frontier[pick].split->gain, -std::numeric_limits<double>::infinity()};
        for (std::size_t i = 0; i < frontier.size(); ++i) {
            if (i != pick && frontier[i].split) {
                step.best_other_gain = std::max(step.best_other_gain, frontier[i].split->gain);
            }
        }
        out.trace.push_back(step);

        Frontier leaf = std::move(frontier[pick]);
        frontier.erase(frontier.begin() + static_cast<std::ptrdiff_t>(pick));
        const SplitInfo s = *leaf.split;
        std::vector<std::size_t> left_rows, right_rows;
        for (std::size_t r : leaf.rows) {
            (bins.at(r, s.feature) <= s.bin_threshold ? left_rows : right_rows).push_back(r);
        }
        const std::size_t left = nodes.size();
        const std::size_t right = left + 1;
        nodes.resize(nodes.size() + 2);
        auto& parent = nodes[leaf.node];
        parent.feature = static_cast<int>(s.feature);
        parent.bin_threshold = s.bin_threshold;
        parent.threshold = mapper.boundaries(s.feature)[s.bin_threshold];
        parent.left = static_cast<int>(left);
        parent.right = static_cast<int>(right);
        nodes[left].count = left_rows.size();
        nodes[right].count = right_rows.size();

        Frontier lf{left, leaf.depth + 1, std::move(left_rows), std::nullopt};
        Frontier rf{right, leaf.depth + 1, std::move(right_rows), std::nullopt};
        lf.split = candidate(lf.rows, lf.depth);
        rf.split = candidate(rf.rows, rf.depth);
        frontier.push_back(std::move(lf));
        frontier.push_back(std::move(rf));
        ++leaves;
    }

    for (const auto& f : frontier) {
        double g = 0.0;
        double h = 0.0;
        for (std::size_t r : f.rows) {
            g += grad[r];
            h += hess[r];
        }
        const double denom = h + cfg.lambda_l2;
        nodes[f.node].value = denom > 0.0 ? -g / denom * cfg.learning_rate : 0.0;
    }
    preorder(nodes, 0, out.tree.nodes);
    return out;
}

// ---------------------------------------------------------------------------
// Ensemble

double gbdt_margin(const TreeEnsemble& ens, std::span<const double> x) {
    if (x.size() != ens.num_features) {
        throw ValidationError("GBDT input dimension " + std::to_string(x.size()) +
                              " does not match model dimension " + std::to_string(ens.num_features));
    }
    double m = ens.base_score;
    for (const auto& t : ens.trees) m += t.predict(x);
    return m;
}

double gbdt_predict(const TreeEnsemble& ens, std::span<const double> x) {
    return sigmoid(gbdt_margin(ens, x));
}

std::vector<double> gbdt_predict_batch(const TreeEnsemble& ens, const FeatureMatrix& x) {
    std::vector<double> out;
    out.reserve(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) out.push_back(gbdt_predict(ens, x.row(i)));
    return out;
}

namespace {

double mean_logloss(std::span<const double> margin, std::span<const double> y) {
    double s = 0.0;
    for (std::size_t i = 0; i < margin.size(); ++i) {
        const double m = margin[i];
        const double softplus = m > 0.0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m));
        s += softplus - y[i] * m;
    }
    return s / static_cast<double>(margin.size());
}

std::vector<Label> to_labels(std::span<const double> y) {
    std::vector<Label> out;
    out.reserve(y.size());
    for (double v : y) out.push_back(v > 0.5 ? Label::bonafide : Label::spoof);
    return out;
}

}  // namespace

GbdtTrainResult train_gbdt(const FeatureMatrix& train_x, std::span<const double> train_y,
                           const FeatureMatrix& valid_x, std::span<const double> valid_y,
                           const GbdtConfig& cfg) {
    cfg.validate();
    if (train_x.rows == 0 || train_x.rows != train_y.size()) {
        throw ValidationError("GBDT training set is empty or misaligned");
    }
    if (valid_x.rows != valid_y.size() || valid_x.rows == 0) {
        throw ValidationError("GBDT validation set is empty or misaligned");
    }
    if (valid_x.cols != train_x.cols) {
        throw ValidationError("GBDT train/valid feature dimensions differ");
    }
    double positives = 0.0;
    for (double v : train_y) positives += v;
    const auto n = static_cast<double>(train_y.size());
    if (positives == 0.0 || positives == n) {
        throw ValidationError("GBDT training set must contain both bonafide and spoof records");
    }

    GbdtTrainResult res;
    auto& ens = res.ensemble;
    ens.config = cfg;
    ens.num_features = train_x.cols;
    const BinMapper mapper = build_bins(train_x, cfg.max_bin);
    ens.bin_boundaries = mapper.all_boundaries();
    const double prior = positives / n;
    ens.base_score = std::log(prior / (1.0 - prior));

    const BinnedMatrix bins = mapper.bin_all(train_x);
    std::vector<std::size_t> all_rows(train_x.rows);
    for (std::size_t i = 0; i < all_rows.size(); ++i) all_rows[i] = i;

    std::vector<double> margin(train_x.rows, ens.base_score);
    std::vector<double> valid_margin(valid_x.rows, ens.base_score);
    std::vector<double> grad(train_x.rows), hess(train_x.rows);
    const auto valid_labels = to_labels(valid_y);

    std::vector<Tree> trees;
    double best_auc = -1.0;
    std::size_t best_round = 0;
    for (int round = 1; round <= cfg.num_rounds; ++round) {
        for (std::size_t i = 0; i < train_x.rows; ++i) {
            const double p = sigmoid(margin[i]);
            grad[i] = p - train_y[i];
            hess[i] = p * (1.0 - p);
        }
        GrownTree grown = grow_tree(all_rows, bins, mapper, grad, hess, cfg);
        if (grown.tree.nodes.size() <= 1) break;  // nothing left to split

        for (std::size_t i = 0; i < train_x.rows; ++i) margin[i] += grown.tree.predict(train_x.row(i));
        for (std::size_t i = 0; i < valid_x.rows; ++i) {
            valid_margin[i] += grown.tree.predict(valid_x.row(i));
        }
        trees.push_back(std::move(grown.tree));
        res.traces.push_back(std::move(grown.trace));

        RoundLog log;
        log.round = static_cast<std::size_t>(round);
        log.train_logloss = mean_logloss(margin, train_y);
        log.valid_auc = compute_auc(valid_margin, valid_labels);
        res.history.push_back(log);

        if (log.valid_auc > best_auc) {
            best_auc = log.valid_auc;
            best_round = log.round;
        } else if (log.round - best_round >= static_cast<std::size_t>(cfg.early_stopping_patience)) {
            break;
        }
    }
    res.best_round = best_round;
    trees.resize(best_round);
    ens.trees = std::move(trees);
    return res;
}

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json to_json(const TreeEnsemble& ens) {
    nlohmann::json j;
    j["config"] = to_json(ens.config);
    j["num_features"] = ens.num_features;
    j["base_score"] = ens.base_score;
    j["bin_boundaries"] = ens.bin_boundaries;
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : ens.trees) {
        nlohmann::json tj;
        std::vector<int> feature, left, right;
        std::vector<std::size_t> bin_threshold, count;
        std::vector<double> threshold, value;
        for (const auto& n : t.nodes) {
            feature.push_back(n.feature);
            bin_threshold.push_back(n.bin_threshold);
            threshold.push_back(n.threshold);
            left.push_back(n.left);
            right.push_back(n.right);
            value.push_back(n.value);
            count.push_back(n.count);
        }
        tj["feature"] = feature;
        tj["bin_threshold"] = bin_threshold;
        tj["threshold"] = threshold;
        tj["left"] = left;
        tj["right"] = right;
        tj["value"] = value;
        tj["count"] = count;
        trees.push_back(std::move(tj));
    }
    j["trees"] = std::move(trees);
    return j;
}

TreeEnsemble ensemble_from_json(const nlohmann::json& j) {
    TreeEnsemble ens;
    try {
        ens.config = gbdt_config_from_json(j.at("config"));
        ens.num_features = j.at("num_features").get<std::size_t>();
        ens.base_score = j.at("base_score").get<double>();
        ens.bin_boundaries = j.at("bin_boundaries").get<std::vector<std::vector<double>>>();
        for (const auto& tj : j.at("trees")) {
            const auto feature = tj.at("feature").get<std::vector<int>>();
            const auto bin_threshold = tj.at("bin_threshold").get<std::vector<std::size_t>>();
            const auto threshold = tj.at("threshold").get<std::vector<double>>();
            const auto left = tj.at("left").get<std::vector<int>>();
            const auto right = tj.at("right").get<std::vector<int>>();
            const auto value = tj.at("value").get<std::vector<double>>();
            const auto count = tj.at("count").get<std::vector<std::size_t>>();
            const std::size_t n = feature.size();
            if (bin_threshold.size() != n || threshold.size() != n || left.size() != n ||
                right.size() != n || value.size() != n || count.size() != n) {
                throw ValidationError("tree arrays differ in length");
            }
            Tree t;
            for (std::size_t i = 0; i < n; ++i) {
                TreeNode node{feature[i], bin_threshold[i], threshold[i], left[i], right[i],
                              value[i], count[i]};
                if (!node.is_leaf()) {
                    if (node.left <= static_cast<int>(i) || node.right <= static_cast<int>(i) ||
                        node.left >= static_cast<int>(n) || node.right >= static_cast<int>(n) ||
                        static_cast<std::size_t>(node.feature) >= ens.num_features) {
                        throw ValidationError("malformed tree node " + std::to_string(i));
                    }
                }
                t.nodes.push_back(node);
            }
            if (t.nodes.empty()) throw ValidationError("empty tree");
            ens.trees.push_back(std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("invalid GBDT model JSON: ") + e.what());
    }
    BinMapper check(ens.bin_boundaries);
    (void)check;
    return ens;
}

}  // namespace mosfad
