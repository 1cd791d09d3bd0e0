#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <vector>

#include "mosfad/error.hpp"
#include "mosfad/features.hpp"
#include "mosfad/metrics.hpp"
#include "mosfad/mos_filter.hpp"
#include "mosfad/synthgen.hpp"
#include "test_util.hpp"

using namespace mosfad;

namespace {

double logit(double p) { return std::log(p / (1.0 - p)); }

GenConfig small(std::size_t n_train, std::size_t n_valid, std::size_t n_eval) {
    GenConfig c;
    c.n_train = n_train;
    c.n_valid = n_valid;
    c.n_eval = n_eval;
    return c;
}

// Identical MOS laws for both classes and every system informative everywhere:
// the MOS block cancels and the FAD logits are jointly Gaussian given the label,
// z ~ N(mu 1, sd^2 I + su^2 11^T), so the posterior has a closed form.
GenConfig gaussian_cfg() {
    GenConfig c = small(0, 0, 300);
    c.spoof_prior = 0.7;
    c.mos_bonafide = {{1.0, 3.0, 0.8}};
    c.mos_spoof = c.mos_bonafide;
    c.system_regimes.assign(c.n_fad_systems, Regime{0.0, 5.0});
    c.informative_slope = 1.5;
    c.seed = 9;
    return c;
}

// log N(z; mu 1, sd^2 I + su^2 11^T) up to a label-independent constant, by
// Sherman-Morrison on the equicorrelated covariance.
double gaussian_loglik(const std::vector<double>& z, double mu, double sd, double su) {
    const double n = static_cast<double>(z.size());
    const double a = 1.0 / (sd * sd);
    double ss = 0.0, s = 0.0;
    for (double v : z) {
        ss += (v - mu) * (v - mu);
        s += v - mu;
    }
    const double quad = a * ss - a * a * su * su * s * s / (1.0 + n * a * su * su);
    return -0.5 * quad;
}

}  // namespace

TEST(GenConfig, DefaultsValidateAndRoundTrip) {
    const GenConfig c;
    EXPECT_NO_THROW(c.validate());
    const auto regimes = c.regimes();
    ASSERT_EQ(regimes.size(), 7u);
    EXPECT_EQ(regimes[0].lo, 1.0);
    EXPECT_EQ(regimes[2].hi, 3.25);
    EXPECT_EQ(regimes[3].lo, 3.25);
    EXPECT_EQ(regimes[6].hi, 5.0);
    const auto back = gen_config_from_json(to_json(c));
    EXPECT_EQ(to_json(back).dump(), to_json(c).dump());
}

TEST(GenConfig, InvalidDocumentsRejected) {
    const auto base = to_json(GenConfig{});
    auto with = [&](const char* key, nlohmann::json v) {
        auto j = base;
        j[key] = std::move(v);
        return j;
    };
    EXPECT_THROW(gen_config_from_json(with("spoof_prior", 1.0)), ValidationError);
    EXPECT_THROW(gen_config_from_json(with("spoof_prior", 0.0)), ValidationError);
    EXPECT_THROW(gen_config_from_json(with("shared_noise_sd", 0.0)), ValidationError);
    EXPECT_THROW(gen_config_from_json(with("mos_obs_sd", -1.0)), ValidationError);
    EXPECT_THROW(gen_config_from_json(with("n_train", "many")), ValidationError);
    EXPECT_THROW(gen_config_from_json(with("system_regimes", nlohmann::json::array({{0.0, 6.0}}))),
                 ValidationError);
    EXPECT_THROW(gen_config_from_json(with("unknown_field", 1)), ValidationError);
    EXPECT_THROW(gen_config_from_json(nlohmann::json::array()), ValidationError);

    mosfad::testing::TempDir dir;
    std::ofstream(dir / "bad.json") << "{not json";
    EXPECT_THROW(load_gen_config(dir / "bad.json"), ValidationError);
}

TEST(Generate, SplitSizesAndRecordInvariants) {
    const auto cfg = small(500, 300, 200);
    const auto c = generate(cfg);
    EXPECT_EQ(c.train.size(), 500u);
    EXPECT_EQ(c.valid.size(), 300u);
    EXPECT_EQ(c.eval.size(), 200u);
    std::set<std::string> ids;
    for (const Dataset* ds : {&c.train, &c.valid, &c.eval}) {
        EXPECT_EQ(ds->fad_dim(), 7u);
        EXPECT_EQ(ds->mos_dim(), 7u);
        for (const auto& r : *ds) {
            EXPECT_NO_THROW(validate_record(r));
            EXPECT_TRUE(ids.insert(r.utt_id).second);
            ASSERT_TRUE(r.mos_fused);
            double mean = 0.0;
            for (double m : r.mos) {
                EXPECT_GE(m, 0.0);
                EXPECT_LE(m, 5.0);
                mean += m;
            }
            EXPECT_DOUBLE_EQ(*r.mos_fused, std::clamp(mean / 7.0, 0.0, 5.0));
            for (double f : r.fad) {
                EXPECT_GT(f, 0.0);
                EXPECT_LT(f, 1.0);
            }
        }
    }
}

TEST(Generate, DeterministicAndIndexAddressable) {
    const auto cfg = small(300, 100, 100);
    const auto a = generate(cfg);
    const auto b = generate(cfg);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.eval, b.eval);
    EXPECT_EQ(to_jsonl(a.train), to_jsonl(b.train));
    for (std::size_t i : {0u, 17u, 299u}) EXPECT_EQ(generate_record(cfg, Split::train, i), a.train[i]);
    for (std::size_t i : {0u, 99u}) EXPECT_EQ(generate_record(cfg, Split::eval, i), a.eval[i]);
    // A larger split extends the smaller one record for record.
    const auto big = generate_split(small(600, 0, 0), Split::train);
    for (std::size_t i = 0; i < 300; ++i) ASSERT_EQ(big[i], a.train[i]);

    auto other = cfg;
    other.seed = 43;
    EXPECT_NE(generate_split(other, Split::train), a.train);
}

TEST(Generate, SpoofCountWithinBinomialBand) {
    const auto train = generate_split(GenConfig{}, Split::train);
    const auto rep = balance_report(train);
    const double sigma = std::sqrt(25000 * 0.9 * 0.1);
    EXPECT_LE(std::abs(static_cast<double>(rep.n_spoof) - 22500.0), 3 * sigma);
    EXPECT_EQ(rep.n_spoof + rep.n_bonafide, 25000u);
}

TEST(Generate, BonafideMosMassAboveTwoPointFive) {
    const auto train = generate_split(GenConfig{}, Split::train);
    std::size_t bona = 0, above = 0;
    for (const auto& r : train) {
        if (r.label != Label::bonafide) continue;
        ++bona;
        above += *r.mos_fused > 2.5;
    }
    EXPECT_GE(static_cast<double>(above) / static_cast<double>(bona), 0.98);
}

TEST(Generate, FadScoresAreCorrelated) {
    const auto train = generate_split(GenConfig{}, Split::train);
    EXPECT_GE(mean_fad_correlation(train), 0.3);
}

TEST(Generate, FilterRebalancesDefaultCorpus) {
    const auto train = generate_split(GenConfig{}, Split::train);
    const auto before = balance_report(train);
    ASSERT_TRUE(before.ratio);
    EXPECT_GE(*before.ratio, 5.0);
    const auto after = balance_report(filter_by_mos(train, MosKey::fused(), FilterConfig{3.0, 4.0}));
    ASSERT_TRUE(after.ratio);
    EXPECT_GE(*after.ratio, 0.8);
    EXPECT_LE(*after.ratio, 1.25);
}

TEST(Correlation, KnownMatrix) {
    std::vector<ScoreRecord> recs;
    const double cols[4][3] = {{0.1, 0.2, 0.9}, {0.2, 0.4, 0.8}, {0.3, 0.6, 0.7}, {0.4, 0.8, 0.6}};
    for (int i = 0; i < 4; ++i) {
        ScoreRecord r;
        r.utt_id = std::to_string(i);
        r.label = Label::spoof;
        r.fad = {cols[i][0], cols[i][1], cols[i][2]};
        recs.push_back(r);
    }
    // Pairwise correlations +1, -1, -1.
    EXPECT_NEAR(mean_fad_correlation(Dataset(recs, 3, 0)), -1.0 / 3.0, 1e-12);
}

TEST(Oracle, MatchesClosedFormGaussianMarginal) {
    const auto cfg = gaussian_cfg();
    const auto eval = generate_split(cfg, Split::eval);
    const double sd = cfg.informative_noise_sd, su = cfg.shared_noise_sd, k = cfg.informative_slope;
    for (const auto& r : eval) {
        std::vector<double> z;
        for (double f : r.fad) z.push_back(logit(f));
        const double log_odds = std::log((1 - cfg.spoof_prior) / cfg.spoof_prior) +
                                gaussian_loglik(z, k, sd, su) - gaussian_loglik(z, -k, sd, su);
        const double want = 1.0 / (1.0 + std::exp(-log_odds));
        const double got = bayes_posterior(cfg, r);
        EXPECT_NEAR(got, want, 1e-9) << r.utt_id;
        if (want > 1e-6 && want < 1 - 1e-6) EXPECT_NEAR(logit(got), log_odds, 1e-6) << r.utt_id;
    }
}

TEST(Oracle, SymmetricConfigGivesHalf) {
    GenConfig c = small(0, 0, 2000);
    c.spoof_prior = 0.5;
    c.mos_spoof = c.mos_bonafide;
    c.informative_slope = 0.0;
    const auto eval = generate_split(c, Split::eval);
    for (std::size_t i = 0; i < 200; ++i) EXPECT_NEAR(bayes_posterior(c, eval[i]), 0.5, 1e-12);
    const double eer = oracle_eer(c, eval);
    EXPECT_NEAR(eer, 0.5, 3 * std::sqrt(0.25 / 1000));
}

TEST(Oracle, SeparableConfigHasTinyEer) {
    GenConfig c = small(0, 0, 2000);
    c.informative_slope = 50.0;
    c.system_regimes.assign(c.n_fad_systems, Regime{0.0, 5.0});
    EXPECT_LT(oracle_eer(c, generate_split(c, Split::eval)), 0.01);
}

TEST(Oracle, ConfidentOnHighMosRealLookingRecord) {
    const GenConfig c;
    ScoreRecord r;
    r.utt_id = "x";
    r.label = Label::unknown;
    r.mos.assign(7, 4.8);
    r.mos_fused = 4.8;
    r.fad.assign(7, 0.99);
    EXPECT_GT(bayes_posterior(c, r), 0.99);
    r.mos.assign(7, 1.8);
    r.mos_fused = 1.8;
    r.fad.assign(7, 0.01);
    EXPECT_LT(bayes_posterior(c, r), 0.01);
}

// Only components informative at the observed MOS are monotone: an
// uninformative logit measures the shared noise, and a high shared noise makes
// the remaining scores look more spoof-like.
TEST(Oracle, MonotoneInInformativeFad) {
    const GenConfig c;
    const auto regimes = c.regimes();
    for (double mos : {1.8, 2.8, 3.4, 4.5}) {
        ScoreRecord r;
        r.utt_id = "m";
        r.mos.assign(7, mos);
        r.mos_fused = mos;
        r.fad.assign(7, 0.5);
        for (std::size_t i = 0; i < 7; ++i) {
            if (mos < regimes[i].lo || mos > regimes[i].hi) continue;
            auto probe = r;
            double prev = -1.0;
            for (int k = 1; k < 40; ++k) {
                probe.fad[i] = k / 40.0;
                const double p = bayes_posterior(c, probe);
                EXPECT_GE(p, prev) << "mos " << mos << " system " << i << " fad " << probe.fad[i];
                prev = p;
            }
        }
    }
}

TEST(Oracle, PosteriorInUnitIntervalAndBeatsChance) {
    const auto cfg = small(0, 0, 3000);
    const auto eval = generate_split(cfg, Split::eval);
    const auto post = bayes_posteriors(cfg, eval);
    ASSERT_EQ(post.size(), eval.size());
    for (double p : post) {
        EXPECT_GE(p, 0.0);
        EXPECT_LE(p, 1.0);
    }
    EXPECT_LT(compute_eer(post, labels_of(eval)).eer, 0.05);
}
