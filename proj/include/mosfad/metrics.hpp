#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mosfad/score_data.hpp"

namespace mosfad {

// Detection convention: higher score = more likely bonafide. At threshold t a
// spoof is falsely accepted when score >= t, a bonafide falsely rejected when
// score < t.
struct EerResult {
    double eer = 0.0;
    double threshold = 0.0;
};

struct DetPoint {
    double threshold;  // +inf for the reject-all point
    double far;
    double frr;
};

struct EvalReport {
    double eer = 0.0;
    double eer_threshold = 0.0;
    double auc = 0.0;
    std::size_t n_bonafide = 0;
    std::size_t n_spoof = 0;
};

struct SignificanceResult {
    double p_value = 1.0;
    std::size_t n_bootstrap = 0;
    double eer_a = 0.0;
    double eer_b = 0.0;
    double significant_at = 0.01;
    std::size_t redraws = 0;

    bool significant() const { return p_value < significant_at; }
};

// Linear interpolation between the two adjacent ROC operating points where
// FAR - FRR changes sign. The result is formed from exact integer counts and
// a single final division. Labels must be bonafide or spoof and both classes
// present; throws ValidationError otherwise.
EerResult compute_eer(std::span<const double> scores, std::span<const Label> labels);

// Mann-Whitney estimate of P(bonafide score > spoof score), ties count 1/2.
double compute_auc(std::span<const double> scores, std::span<const Label> labels);

// Operating points at every distinct score plus the reject-all point.
std::vector<DetPoint> det_curve(std::span<const double> scores, std::span<const Label> labels);

EvalReport evaluate(std::span<const double> scores, std::span<const Label> labels);

// Paired bootstrap over utterances. p_value is the fraction of replicates in
// which system A is not better than B (EER_b - EER_a <= 0). Each replicate
// draws from its own substream of `seed`; single-class resamples are redrawn.
SignificanceResult bootstrap_significance(std::span<const double> scores_a,
                                          std::span<const double> scores_b,
                                          std::span<const Label> labels,
                                          std::size_t n_bootstrap = 1000,
                                          std::uint64_t seed = 0, double alpha = 0.01);

// (eer_ref - eer_new) / eer_ref
double relative_reduction(double eer_new, double eer_ref);

nlohmann::json to_json(const EvalReport& report);
nlohmann::json to_json(const SignificanceResult& result);
EvalReport eval_report_from_json(const nlohmann::json& j);
std::string det_csv(const std::vector<DetPoint>& points);

// splitmix64 finaliser, used to derive independent seeds for substreams.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace mosfad
