#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "mosfad/error.hpp"
#include "mosfad/fusion_models.hpp"
#include "mosfad/metrics.hpp"
#include "mosfad/training.hpp"
#include "test_util.hpp"

using namespace mosfad;

namespace {

// Two well-separated clusters in the unit square, bonafide up and right.
Dataset separable_2d(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 0.25);
    std::vector<ScoreRecord> recs;
    for (std::size_t i = 0; i < n; ++i) {
        ScoreRecord r;
        r.utt_id = "s" + std::to_string(i);
        const bool bona = i % 2 == 0;
        r.label = bona ? Label::bonafide : Label::spoof;
        const double base = bona ? 0.75 : 0.0;
        r.fad = {base + u(rng), base + u(rng)};
        r.mos = {bona ? 4.0 : 2.0};
        r.mos_fused = r.mos[0];
        recs.push_back(std::move(r));
    }
    return Dataset(std::move(recs), 2, 1);
}

template <class P>
const P& params_of(const FusionModel& m);

template <>
const MlpParams& params_of<MlpParams>(const FusionModel& m) {
    return std::get<MlpModel>(m.base).params;
}

void check_history_invariants(const TrainHistory& h, std::size_t patience, std::size_t max_epochs) {
    ASSERT_FALSE(h.epochs.empty());
    EXPECT_EQ(h.stopped_epoch, h.epochs.size());
    EXPECT_LE(h.stopped_epoch, max_epochs);
    EXPECT_GE(h.best_epoch, 1u);
    EXPECT_LE(h.stopped_epoch - h.best_epoch, patience);
    double min_valid = h.epochs[0].valid_loss;
    std::size_t first_min = 1;
    for (const auto& e : h.epochs) {
        if (e.valid_loss < min_valid) {
            min_valid = e.valid_loss;
            first_min = e.epoch;
        }
    }
    EXPECT_EQ(h.epochs[h.best_epoch - 1].valid_loss, min_valid);
    EXPECT_EQ(h.best_epoch, first_min);
    if (h.stopped_epoch < max_epochs) EXPECT_EQ(h.stopped_epoch - h.best_epoch, patience);
}

}  // namespace

TEST(Bce, KnownValues) {
    EXPECT_NEAR(bce_loss(0.5, 1.0), std::log(2.0), 1e-15);
    EXPECT_NEAR(bce_loss(0.5, 0.0), 0.693147, 1e-6);
    EXPECT_NEAR(bce_loss(0.9, 1.0), -std::log(0.9), 1e-15);
    EXPECT_NEAR(bce_loss(0.9, 0.0), -std::log(0.1), 1e-14);
    EXPECT_LT(bce_loss(1.0 - 1e-10, 1.0), 1e-9);
    EXPECT_GE(bce_loss(0.3, 1.0), 0.0);
}

TEST(Bce, ClampsAtExtremes) {
    EXPECT_NEAR(bce_loss(0.0, 1.0), -std::log(1e-12), 1e-9);
    EXPECT_NEAR(bce_loss(1.0, 0.0), -std::log(1e-12), 1e-4);
    EXPECT_TRUE(std::isfinite(bce_loss(0.0, 1.0)));
}

TEST(TrainConfig, Validation) {
    TrainConfig c;
    EXPECT_NO_THROW(c.validate());
    c.batch_size = 0;
    EXPECT_THROW(c.validate(), ValidationError);
    c = {};
    c.patience = 0;
    EXPECT_THROW(c.validate(), ValidationError);
    c = {};
    c.learning_rate = -0.1;
    EXPECT_THROW(c.validate(), ValidationError);
    c.learning_rate = std::nan("");
    EXPECT_THROW(c.validate(), ValidationError);
}

TEST(TrainModel, ZeroLearningRateLeavesParamsUnchanged) {
    std::mt19937_64 rng(60);
    const auto tr = mosfad::testing::random_dataset(rng, 200, 3, 2);
    const auto va = mosfad::testing::random_dataset(rng, 100, 3, 2);
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.max_epochs = 5;
    cfg.seed = 3;
    const ModelSpec spec;
    const auto res = train_model(spec, tr, va, cfg);

    std::mt19937_64 init_rng(mix_seed(3, 0));
    EXPECT_EQ(params_of<MlpParams>(res.model), MlpParams::init(3, 3, init_rng));
    // Flat history: no strict improvement after epoch 1, so patience ends the run.
    for (const auto& e : res.history.epochs) {
        EXPECT_EQ(e.valid_loss, res.history.epochs[0].valid_loss);
        EXPECT_NEAR(e.train_loss, res.history.epochs[0].train_loss, 1e-15);
    }
    EXPECT_EQ(res.history.best_epoch, 1u);
}

TEST(TrainModel, SeparableToyReachesLowLoss) {
    const auto tr = separable_2d(100, 61), va = separable_2d(100, 62);
    TrainConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.batch_size = 1;
    cfg.max_epochs = 1000;
    cfg.seed = 5;
    const auto res = train_model(ModelSpec{}, tr, va, cfg);
    const auto& best = res.history.epochs[res.history.best_epoch - 1];
    EXPECT_LT(best.train_loss, 0.1);
    EXPECT_LT(best.valid_loss, 0.1);
    check_history_invariants(res.history, cfg.patience, cfg.max_epochs);
}

TEST(TrainModel, DeterministicGivenSeed) {
    std::mt19937_64 rng(63);
    const auto tr = mosfad::testing::random_dataset(rng, 300, 4, 2);
    const auto va = mosfad::testing::random_dataset(rng, 100, 4, 2);
    TrainConfig cfg;
    cfg.learning_rate = 0.05;
    cfg.max_epochs = 40;
    cfg.seed = 11;
    ModelSpec spec;
    spec.kind = ModelKind::gated_mlp;
    const auto a = train_model(spec, tr, va, cfg);
    const auto b = train_model(spec, tr, va, cfg);
    EXPECT_EQ(history_csv(a.history), history_csv(b.history));
    EXPECT_EQ(to_json(a.model).dump(), to_json(b.model).dump());
    cfg.seed = 12;
    const auto c = train_model(spec, tr, va, cfg);
    EXPECT_NE(history_csv(a.history), history_csv(c.history));
}

TEST(TrainModel, EarlyStoppingInvariants) {
    std::mt19937_64 rng(64);
    // Random labels: validation loss bottoms out early and patience ends the run.
    const auto tr = mosfad::testing::random_dataset(rng, 200, 3, 1);
    const auto va = mosfad::testing::random_dataset(rng, 200, 3, 1);
    for (std::size_t patience : {1u, 3u, 20u}) {
        TrainConfig cfg;
        cfg.learning_rate = 0.5;
        cfg.batch_size = 8;
        cfg.patience = patience;
        cfg.max_epochs = 300;
        cfg.seed = patience;
        const auto res = train_model(ModelSpec{}, tr, va, cfg);
        check_history_invariants(res.history, patience, cfg.max_epochs);
        // The returned snapshot reproduces the best epoch's validation loss.
        const auto preds = predict_batch(res.model, va);
        const auto y = binary_targets(va);
        double loss = 0.0;
        for (std::size_t i = 0; i < preds.size(); ++i) loss += bce_loss(preds[i], y[i]);
        EXPECT_NEAR(loss / preds.size(), res.history.epochs[res.history.best_epoch - 1].valid_loss, 1e-12);
    }
}

TEST(TrainModel, MaxEpochsCapsRun) {
    const auto tr = separable_2d(40, 65), va = separable_2d(40, 66);
    TrainConfig cfg;
    cfg.learning_rate = 0.01;
    cfg.max_epochs = 7;
    const auto res = train_model(ModelSpec{}, tr, va, cfg);
    EXPECT_EQ(res.history.epochs.size(), 7u);
    check_history_invariants(res.history, cfg.patience, cfg.max_epochs);
}

TEST(TrainModel, SingleClassAndEmptyRejected) {
    std::vector<ScoreRecord> recs;
    for (int i = 0; i < 10; ++i) {
        ScoreRecord r;
        r.utt_id = "b" + std::to_string(i);
        r.label = Label::bonafide;
        r.fad = {0.5};
        r.mos_fused = 3.0;
        recs.push_back(r);
    }
    const Dataset one(recs, 1, 0);
    EXPECT_THROW(train_model(ModelSpec{}, one, one, TrainConfig{}), ValidationError);
    EXPECT_THROW(train_model(ModelSpec{}, Dataset({}, 1, 0), one, TrainConfig{}), ValidationError);
}

TEST(TrainModel, DimensionMismatchRejected) {
    std::mt19937_64 rng(67);
    const auto tr = mosfad::testing::random_dataset(rng, 50, 3, 1);
    const auto va = mosfad::testing::random_dataset(rng, 50, 4, 1);
    EXPECT_THROW(train_model(ModelSpec{}, tr, va, TrainConfig{}), ValidationError);
}

TEST(TrainModel, NonFiniteLossAborts) {
    std::mt19937_64 rng(68);
    const auto tr = mosfad::testing::random_dataset(rng, 100, 3, 3);
    ModelSpec spec;
    spec.kind = ModelKind::mos_fuser;
    TrainConfig cfg;
    cfg.learning_rate = 1e6;
    EXPECT_THROW(train_model(spec, tr, tr, cfg), TrainingError);
}

TEST(TrainModel, MosFuserLearnsAverage) {
    std::mt19937_64 rng(69);
    std::uniform_real_distribution<double> u(1.5, 4.5);
    std::vector<ScoreRecord> recs;
    for (int i = 0; i < 400; ++i) {
        ScoreRecord r;
        r.utt_id = "m" + std::to_string(i);
        r.label = i % 2 ? Label::spoof : Label::bonafide;
        r.fad = {0.5};
        r.mos = {u(rng), u(rng)};
        r.mos_fused = 0.5 * (r.mos[0] + r.mos[1]);
        recs.push_back(r);
    }
    const Dataset ds(recs, 1, 2);
    ModelSpec spec;
    spec.kind = ModelKind::mos_fuser;
    TrainConfig cfg;
    cfg.learning_rate = 0.01;
    cfg.batch_size = 1;
    cfg.max_epochs = 300;
    const auto res = train_model(spec, ds, ds, cfg);
    EXPECT_LT(res.history.epochs[res.history.best_epoch - 1].valid_loss, 1e-3);
    const auto pred = predict_batch(res.model, ds);
    for (std::size_t i = 0; i < ds.size(); ++i) EXPECT_NEAR(pred[i], *ds[i].mos_fused, 0.1);
}

TEST(TrainModel, EmbeddingModeHalvesHiddenWidth) {
    ModelSpec spec;
    spec.embedding_mode = true;
    EXPECT_EQ(resolve_hidden_dim(spec, 8), 4u);
    EXPECT_EQ(resolve_hidden_dim(spec, 7), 3u);
    EXPECT_EQ(resolve_hidden_dim(spec, 1), 1u);
    spec.embedding_mode = false;
    EXPECT_EQ(resolve_hidden_dim(spec, 8), 3u);
}

TEST(TrainModel, HistoryCsvFormat) {
    TrainHistory h;
    h.epochs = {{1, 0.5, 0.25}, {2, 0.125, 0.0625}};
    EXPECT_EQ(history_csv(h), "epoch,train_loss,valid_loss\n1,0.5,0.25\n2,0.125,0.0625\n");
}

TEST(SgdStep, TinyStepDecreasesSampleLoss) {
    std::mt19937_64 rng(70);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 100; ++t) {
        auto p = MlpParams::init(5, 3, rng);
        std::vector<double> x(5);
        for (auto& v : x) v = u(rng);
        const double y = t % 2;
        auto g = MlpParams::zeros(5, 3);
        const double before = mlp_loss_grad(p, x, y, g, 1.0);
        axpy_params(p, g, -1e-6);
        EXPECT_LT(mlp_loss(p, x, y), before) << "draw " << t;
    }
}

TEST(GradCheck, RandomDrawsWithinTolerance) {
    std::mt19937_64 rng(71);
    std::uniform_real_distribution<double> u(0.0, 1.0), m(1.0, 5.0);
    for (int t = 0; t < 50; ++t) {
        const auto mlp = MlpParams::init(7, 3, rng);
        std::vector<double> x(7), mos(7);
        for (auto& v : x) v = u(rng);
        for (auto& v : mos) v = m(rng);
        EXPECT_LE(grad_check(mlp, x, t % 2).max_rel_error, 1e-5);
        const auto gated = GatedMlpParams::init(7, 7, 3, rng);
        EXPECT_LE(grad_check(gated, x, mos, t % 2).max_rel_error, 1e-5);
        auto fuser = MosFuserParams::init(7, rng);
        if (mos_fuser_raw(fuser, mos) > 0.0 && mos_fuser_raw(fuser, mos) < 5.0) {
            EXPECT_LE(grad_check(fuser, mos, m(rng)).max_rel_error, 1e-5);
        }
    }
}

TEST(GradCheck, SaturatedModelHasNoiseLevelError) {
    auto p = MlpParams::zeros(3, 3);
    p.b2 = 40.0;
    const std::vector<double> x{0.2, 0.4, 0.6};
    const auto r = grad_check(p, x, 1.0);
    EXPECT_LE(r.max_abs_error, 1e-7);
    EXPECT_EQ(r.n_params, param_count(p));
}

TEST(GradCheck, HalvingEpsilonKeepsErrorSecondOrder) {
    std::mt19937_64 rng(72);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 20; ++t) {
        auto p = MlpParams::init(4, 3, rng);
        for (auto b : p.blocks()) {
            for (double& v : b) v *= 4.0;  // larger curvature so truncation error dominates
        }
        std::vector<double> x(4);
        for (auto& v : x) v = u(rng);
        const double coarse = grad_check(p, x, 1.0, 1e-2).max_rel_error;
        const double fine = grad_check(p, x, 1.0, 5e-3).max_rel_error;
        EXPECT_LE(fine, 4.0 * coarse);
    }
}

TEST(GbdtModel, TrainRecordsConfigAndPredicts) {
    std::mt19937_64 rng(73);
    const auto tr = mosfad::testing::random_dataset(rng, 300, 3, 2);
    const auto out = train_gbdt_model(tr, tr, FeatureSet::fad_fused, GbdtConfig{});
    EXPECT_EQ(model_type(out.model), "gbdt");
    EXPECT_EQ(out.model.train_config.at("gbdt"), to_json(GbdtConfig{}));
    const auto p = predict_batch(out.model, tr);
    ASSERT_EQ(p.size(), tr.size());
    for (double v : p) {
        EXPECT_GT(v, 0.0);
        EXPECT_LT(v, 1.0);
    }
}
