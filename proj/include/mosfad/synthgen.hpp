#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mosfad/score_data.hpp"

namespace mosfad {

// Normal component truncated to [kMosMin, kMosMax].
struct TruncNormal {
    double weight = 1.0;
    double mean = 3.0;
    double sd = 1.0;
};

inline constexpr double kMosMin = 1.0;
inline constexpr double kMosMax = 5.0;

struct Regime {
    double lo = 0.0;
    double hi = 5.0;
};

struct GenConfig {
    std::size_t n_train = 25000;
    std::size_t n_valid = 25000;
    std::size_t n_eval = 20000;
    double spoof_prior = 0.9;
    std::vector<TruncNormal> mos_bonafide{{1.0, 3.6, 0.3}};
    std::vector<TruncNormal> mos_spoof{{0.9, 2.0, 0.5}, {0.1, 3.2, 0.3}};
    std::size_t n_fad_systems = 7;
    std::size_t n_mos_systems = 7;
    // Empty means the default split: first three systems on [1, 3.25], rest on [3.25, 5].
    std::vector<Regime> system_regimes;
    double informative_slope = 4.0;
    double informative_noise_sd = 3.0;
    double uninformative_noise_sd = 1.0;
    double shared_noise_sd = 1.0;
    double mos_obs_sd = 0.2;
    std::uint64_t seed = 42;

    void validate() const;
    std::vector<Regime> regimes() const;  // resolved per-system regimes
};

nlohmann::json to_json(const GenConfig& cfg);
GenConfig gen_config_from_json(const nlohmann::json& j);
GenConfig load_gen_config(const std::filesystem::path& path);

struct Corpus {
    Dataset train;
    Dataset valid;
    Dataset eval;
};

// Records are generated independently from per-record substreams, so any
// index range reproduces the sequential output.
ScoreRecord generate_record(const GenConfig& cfg, Split split, std::size_t index);
Dataset generate_split(const GenConfig& cfg, Split split);
Corpus generate(const GenConfig& cfg);

// Exact posterior P(bonafide | mos, fad) under cfg. The shared noise is
// integrated by Gauss-Hermite quadrature, the true MOS by composite
// Gauss-Legendre over [kMosMin, kMosMax] split at regime boundaries.
double bayes_posterior(const GenConfig& cfg, const ScoreRecord& r);
std::vector<double> bayes_posteriors(const GenConfig& cfg, const Dataset& ds);
double oracle_eer(const GenConfig& cfg, const Dataset& ds);

// Mean pairwise Pearson correlation between FAD columns.
double mean_fad_correlation(const Dataset& ds);

}  // namespace mosfad
