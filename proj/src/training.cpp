#include "mosfad/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "mosfad/error.hpp"
#include "mosfad/io_util.hpp"
#include "mosfad/metrics.hpp"
#include "mosfad/mos_filter.hpp"

namespace mosfad {

using nlohmann::json;

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw ValidationError("learning rate must be finite and non-negative");
    }
    if (batch_size < 1) throw ValidationError("batch size must be >= 1");
    if (patience < 1) throw ValidationError("patience must be >= 1");
    if (max_epochs < 1) throw ValidationError("max_epochs must be >= 1");
}

json to_json(const TrainConfig& cfg) {
    json j;
    j["optimizer"] = "sgd";
    j["learning_rate"] = cfg.learning_rate;
    j["batch_size"] = cfg.batch_size;
    j["max_epochs"] = cfg.max_epochs;
    j["patience"] = cfg.patience;
    j["seed"] = cfg.seed;
    j["shuffle"] = cfg.shuffle;
    return j;
}

std::string history_csv(const TrainHistory& h) {
    std::string out = "epoch,train_loss,valid_loss\n";
    for (const auto& e : h.epochs) {
        out += std::to_string(e.epoch) + "," + format_double(e.train_loss) + "," +
               format_double(e.valid_loss) + "\n";
    }
    return out;
}

json to_json(const TrainHistory& h) {
    json j;
    j["epochs_run"] = h.epochs.size();
    j["best_epoch"] = h.best_epoch;
    j["stopped_epoch"] = h.stopped_epoch;
    if (h.best_epoch > 0) {
        const auto& best = h.epochs[h.best_epoch - 1];
        j["best_train_loss"] = best.train_loss;
        j["best_valid_loss"] = best.valid_loss;
    }
    if (!h.epochs.empty()) {
        j["final_train_loss"] = h.epochs.back().train_loss;
        j["final_valid_loss"] = h.epochs.back().valid_loss;
    }
    return j;
}

std::size_t resolve_hidden_dim(const ModelSpec& spec, std::size_t in_dim) {
    if (spec.embedding_mode) return std::max<std::size_t>(in_dim / 2, 1);
    return spec.hidden_dim;
}

json to_json(const ModelSpec& spec) {
    json j;
    switch (spec.kind) {
        case ModelKind::mlp:
            j["model"] = "mlp";
            j["features"] = std::string(to_string(spec.features));
            break;
        case ModelKind::gated_mlp:
            j["model"] = "gated-mlp";
            j["gate_input"] = std::string(to_string(spec.gate_input));
            break;
        case ModelKind::mos_fuser:
            j["model"] = "mos-fuser";
            j["quantize_targets"] = spec.quantize_targets;
            j["quantize_step"] = spec.quantize_step;
            break;
    }
    if (spec.kind != ModelKind::mos_fuser) {
        j["hidden_dim"] = spec.hidden_dim;
        j["embedding_mode"] = spec.embedding_mode;
    }
    return j;
}

double bce_loss(double pred, double label) {
    constexpr double eps = 1e-12;
    const double p = std::clamp(pred, eps, 1.0 - eps);
    return -(label * std::log(p) + (1.0 - label) * std::log(1.0 - p));
}

namespace {

struct MlpTask {
    using Params = MlpParams;
    FeatureMatrix tx, vx;
    std::vector<double> ty, vy;

    std::size_t n_train() const { return tx.rows; }
    std::size_t n_valid() const { return vx.rows; }
    double loss_grad(const Params& p, std::size_t i, Params& g, double s) const {
        return mlp_loss_grad(p, tx.row(i), ty[i], g, s);
    }
    double valid_loss(const Params& p, std::size_t i) const { return mlp_loss(p, vx.row(i), vy[i]); }
};

struct GatedTask {
    using Params = GatedMlpParams;
    FeatureMatrix tf, tg, vf, vg;
    std::vector<double> ty, vy;

    std::size_t n_train() const { return tf.rows; }
    std::size_t n_valid() const { return vf.rows; }
    double loss_grad(const Params& p, std::size_t i, Params& g, double s) const {
        return gated_mlp_loss_grad(p, tf.row(i), tg.row(i), ty[i], g, s);
    }
    double valid_loss(const Params& p, std::size_t i) const {
        return gated_mlp_loss(p, vf.row(i), vg.row(i), vy[i]);
    }
};

struct FuserTask {
    using Params = MosFuserParams;
    FeatureMatrix tm, vm;
    std::vector<double> ty, vy;

    std::size_t n_train() const { return tm.rows; }
    std::size_t n_valid() const { return vm.rows; }
    double loss_grad(const Params& p, std::size_t i, Params& g, double s) const {
        return mos_fuser_loss_grad(p, tm.row(i), ty[i], g, s);
    }
    double valid_loss(const Params& p, std::size_t i) const {
        return mos_fuser_loss(p, vm.row(i), vy[i]);
    }
};

template <class Task>
std::pair<typename Task::Params, TrainHistory> run_sgd(const Task& task,
                                                       typename Task::Params params,
                                                       const TrainConfig& cfg) {
    using Params = typename Task::Params;
    const std::size_t n = task.n_train();
    TrainHistory hist;
    Params best = params;
    Params grad = params;
    double best_valid = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(mix_seed(cfg.seed, 1));

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        if (cfg.shuffle) std::shuffle(order.begin(), order.end(), rng);
        double train_sum = 0.0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t stop = std::min(n, start + cfg.batch_size);
            const double scale = 1.0 / static_cast<double>(stop - start);
            zero_params(grad);
            for (std::size_t k = start; k < stop; ++k) {
                train_sum += task.loss_grad(params, order[k], grad, scale);
            }
            if (cfg.learning_rate > 0.0) axpy_params(params, grad, -cfg.learning_rate);
        }
        double valid_sum = 0.0;
        for (std::size_t i = 0; i < task.n_valid(); ++i) valid_sum += task.valid_loss(params, i);

        EpochLog log{epoch, train_sum / static_cast<double>(n),
                     valid_sum / static_cast<double>(task.n_valid())};
        if (!std::isfinite(log.train_loss) || !std::isfinite(log.valid_loss) ||
            !params_finite(params)) {
            throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) +
                                " (train " + format_double(log.train_loss) + ", valid " +
                                format_double(log.valid_loss) + ")");
        }
        hist.epochs.push_back(log);
        hist.stopped_epoch = epoch;
        if (log.valid_loss < best_valid) {
            best_valid = log.valid_loss;
            best = params;
            hist.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    return {std::move(best), std::move(hist)};
}

void require_both_classes(const std::vector<double>& targets, const char* which) {
    const double pos = std::accumulate(targets.begin(), targets.end(), 0.0);
    if (pos == 0.0 || pos == static_cast<double>(targets.size())) {
        throw ValidationError(std::string(which) +
                              " set must contain both bonafide and spoof records");
    }
}

std::vector<double> mos_targets(const Dataset& ds, const ModelSpec& spec) {
    std::vector<double> t;
    t.reserve(ds.size());
    for (const auto& r : ds) {
        double v = fused_mos(r);
        if (spec.quantize_targets) v = quantize_mos(std::clamp(v, 1.0, 5.0), spec.quantize_step);
        t.push_back(v);
    }
    return t;
}

}  // namespace

TrainResult train_model(const ModelSpec& spec, const Dataset& train, const Dataset& valid,
                        const TrainConfig& cfg) {
    cfg.validate();
    if (train.empty() || valid.empty()) {
        throw ValidationError("training and validation sets must be non-empty");
    }
    if (train.fad_dim() != valid.fad_dim() || train.mos_dim() != valid.mos_dim()) {
        throw ValidationError("training and validation sets have different dimensions");
    }
    std::mt19937_64 init_rng(mix_seed(cfg.seed, 0));
    TrainResult res;
    res.model.init_seed = cfg.seed;
    json config = to_json(cfg);
    config["model_spec"] = to_json(spec);
    res.model.train_config = config;

    switch (spec.kind) {
        case ModelKind::mlp: {
            MlpTask task{feature_matrix(train, spec.features), feature_matrix(valid, spec.features),
                         binary_targets(train), binary_targets(valid)};
            require_both_classes(task.ty, "training");
            const std::size_t in = task.tx.cols;
            auto params = MlpParams::init(in, resolve_hidden_dim(spec, in), init_rng);
            auto [best, hist] = run_sgd(task, std::move(params), cfg);
            res.model.base = MlpModel{spec.features, std::move(best)};
            res.history = std::move(hist);
            break;
        }
        case ModelKind::gated_mlp: {
            GatedTask task{fad_matrix(train), gate_matrix(train, spec.gate_input), fad_matrix(valid),
                           gate_matrix(valid, spec.gate_input), binary_targets(train),
                           binary_targets(valid)};
            require_both_classes(task.ty, "training");
            if (task.tg.cols == 0) throw ValidationError("gate input has dimension 0");
            const std::size_t n = task.tf.cols;
            auto params = GatedMlpParams::init(n, task.tg.cols, resolve_hidden_dim(spec, n), init_rng);
            auto [best, hist] = run_sgd(task, std::move(params), cfg);
            res.model.base = GatedMlpModel{spec.gate_input, std::move(best)};
            res.history = std::move(hist);
            break;
        }
        case ModelKind::mos_fuser: {
            FuserTask task{mos_matrix(train), mos_matrix(valid), mos_targets(train, spec),
                           mos_targets(valid, spec)};
            auto params = MosFuserParams::init(train.mos_dim(), init_rng);
            auto [best, hist] = run_sgd(task, std::move(params), cfg);
            res.model.base = MosFuserModel{std::move(best)};
            res.history = std::move(hist);
            break;
        }
    }
    return res;
}

GbdtTrainOutput train_gbdt_model(const Dataset& train, const Dataset& valid, FeatureSet features,
                                 const GbdtConfig& cfg) {
    if (train.empty() || valid.empty()) {
        throw ValidationError("training and validation sets must be non-empty");
    }
    const auto tx = feature_matrix(train, features);
    const auto vx = feature_matrix(valid, features);
    const auto ty = binary_targets(train);
    const auto vy = binary_targets(valid);
    GbdtTrainOutput out;
    out.result = train_gbdt(tx, ty, vx, vy, cfg);
    json config;
    config["model_spec"] = {{"model", "gbdt"}, {"features", std::string(to_string(features))}};
    config["gbdt"] = to_json(cfg);
    out.model.train_config = config;
    out.model.base = GbdtModel{features, out.result.ensemble};
    return out;
}

// ---------------------------------------------------------------------------

namespace {

template <class P, class LossFn, class GradFn>
GradCheckResult check_gradients(const P& p, LossFn loss, GradFn analytic, double eps,
                                double abs_floor) {
    P g = p;
    zero_params(g);
    analytic(p, g);
    const auto a = flatten(g);

    P q = p;
    GradCheckResult res;
    std::size_t k = 0;
    for (auto block : q.blocks()) {
        for (double& v : block) {
            const double saved = v;
            v = saved + eps;
            const double up = loss(q);
            v = saved - eps;
            const double down = loss(q);
            v = saved;
            const double numeric = (up - down) / (2.0 * eps);
            const double diff = std::abs(a[k] - numeric);
            const double scale = std::max(std::abs(a[k]), std::abs(numeric));
            res.max_abs_error = std::max(res.max_abs_error, diff);
            if (scale >= abs_floor) res.max_rel_error = std::max(res.max_rel_error, diff / scale);
            ++k;
        }
    }
    res.n_params = k;
    return res;
}

}  // namespace

GradCheckResult grad_check(const MlpParams& p, std::span<const double> x, double target,
                           double eps, double abs_floor) {
    return check_gradients(
        p, [&](const MlpParams& q) { return mlp_loss(q, x, target); },
        [&](const MlpParams& q, MlpParams& g) { mlp_loss_grad(q, x, target, g, 1.0); }, eps,
        abs_floor);
}

GradCheckResult grad_check(const GatedMlpParams& p, std::span<const double> fad,
                           std::span<const double> mos, double target, double eps,
                           double abs_floor) {
    return check_gradients(
        p, [&](const GatedMlpParams& q) { return gated_mlp_loss(q, fad, mos, target); },
        [&](const GatedMlpParams& q, GatedMlpParams& g) {
            gated_mlp_loss_grad(q, fad, mos, target, g, 1.0);
        },
        eps, abs_floor);
}

GradCheckResult grad_check(const MosFuserParams& p, std::span<const double> mos, double target,
                           double eps, double abs_floor) {
    return check_gradients(
        p, [&](const MosFuserParams& q) { return mos_fuser_loss(q, mos, target); },
        [&](const MosFuserParams& q, MosFuserParams& g) {
            mos_fuser_loss_grad(q, mos, target, g, 1.0);
        },
        eps, abs_floor);
}

}  // namespace mosfad
