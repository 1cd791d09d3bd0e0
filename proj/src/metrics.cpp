#include "mosfad/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "mosfad/error.hpp"
#include "mosfad/io_util.hpp"

namespace mosfad {

namespace {

using Wide = __int128;

struct ClassCounts {
    std::int64_t bonafide = 0;
    std::int64_t spoof = 0;
};

ClassCounts check_inputs(std::span<const double> scores, std::span<const Label> labels) {
    if (scores.size() != labels.size()) {
        throw ValidationError("scores and labels differ in length");
    }
    ClassCounts c;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!std::isfinite(scores[i])) {
            throw ValidationError("non-finite score at index " + std::to_string(i));
        }
        if (labels[i] == Label::bonafide) {
            ++c.bonafide;
        } else if (labels[i] == Label::spoof) {
            ++c.spoof;
        } else {
            throw ValidationError("unknown label at index " + std::to_string(i));
        }
    }
    if (c.bonafide == 0 || c.spoof == 0) {
        throw ValidationError("metric needs at least one bonafide and one spoof score");
    }
    return c;
}

// Distinct scores ascending with per-class counts at each value.
struct Level {
    double score;
    std::int64_t bonafide;
    std::int64_t spoof;
};

std::vector<Level> levels(std::span<const double> scores, std::span<const Label> labels) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    std::vector<Level> out;
    for (std::size_t idx : order) {
        if (out.empty() || out.back().score != scores[idx]) {
            out.push_back({scores[idx], 0, 0});
        }
        if (labels[idx] == Label::bonafide) {
            ++out.back().bonafide;
        } else {
            ++out.back().spoof;
        }
    }
    return out;
}

Wide gcd_wide(Wide a, Wide b) {
    if (a < 0) a = -a;
    if (b < 0) b = -b;
    while (b != 0) {
        Wide t = a % b;
        a = b;
        b = t;
    }
    return a;
}

double ratio(Wide num, Wide den) {
    Wide g = gcd_wide(num, den);
    if (g > 1) {
        num /= g;
        den /= g;
    }
    return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

EerResult compute_eer(std::span<const double> scores, std::span<const Label> labels) {
    const ClassCounts c = check_inputs(scores, labels);
    const auto lv = levels(scores, labels);

    // Operating point k uses threshold lv[k].score; k == lv.size() is +inf.
    // accepted spoofs A and rejected bonafides B are integer counts.
    std::int64_t a = c.spoof;
    std::int64_t b = 0;
    Wide d_prev = static_cast<Wide>(a) * c.bonafide - static_cast<Wide>(b) * c.spoof;
    std::int64_t a_prev = a;
    double t_prev = lv.front().score;
    for (std::size_t k = 1; k <= lv.size(); ++k) {
        a -= lv[k - 1].spoof;
        b += lv[k - 1].bonafide;
        const Wide d = static_cast<Wide>(a) * c.bonafide - static_cast<Wide>(b) * c.spoof;
        const bool at_inf = k == lv.size();
        const double t = at_inf ? std::numeric_limits<double>::infinity() : lv[k].score;
        if (d == 0) {
            return {ratio(a, c.spoof), at_inf ? t_prev : t};
        }
        if (d < 0) {
            const Wide span = d_prev - d;
            const Wide num = static_cast<Wide>(a_prev) * span + d_prev * (a - a_prev);
            const Wide den = static_cast<Wide>(c.spoof) * span;
            const double alpha = static_cast<double>(d_prev) / static_cast<double>(span);
            const double thr = at_inf ? t_prev : t_prev + alpha * (t - t_prev);
            return {ratio(num, den), thr};
        }
        d_prev = d;
        a_prev = a;
        t_prev = t;
    }
    // d reaches -Ns*Nb at +inf, so the loop always returns.
    return {0.5, t_prev};
}

double compute_auc(std::span<const double> scores, std::span<const Label> labels) {
    const ClassCounts c = check_inputs(scores, labels);
    const auto lv = levels(scores, labels);
    Wide twice_wins = 0;
    std::int64_t spoof_below = 0;
    for (const auto& l : lv) {
        twice_wins += static_cast<Wide>(2) * l.bonafide * spoof_below +
                      static_cast<Wide>(l.bonafide) * l.spoof;
        spoof_below += l.spoof;
    }
    return ratio(twice_wins, static_cast<Wide>(2) * c.bonafide * c.spoof);
}

std::vector<DetPoint> det_curve(std::span<const double> scores, std::span<const Label> labels) {
    const ClassCounts c = check_inputs(scores, labels);
    const auto lv = levels(scores, labels);
    std::vector<DetPoint> out;
    out.reserve(lv.size() + 1);
    std::int64_t a = c.spoof;
    std::int64_t b = 0;
    const auto ns = static_cast<double>(c.spoof);
    const auto nb = static_cast<double>(c.bonafide);
    for (const auto& l : lv) {
        out.push_back({l.score, static_cast<double>(a) / ns, static_cast<double>(b) / nb});
        a -= l.spoof;
        b += l.bonafide;
    }
    out.push_back({std::numeric_limits<double>::infinity(), 0.0, 1.0});
    return out;
}

EvalReport evaluate(std::span<const double> scores, std::span<const Label> labels) {
    const ClassCounts c = check_inputs(scores, labels);
    const auto eer = compute_eer(scores, labels);
    EvalReport rep;
    rep.eer = eer.eer;
    rep.eer_threshold = eer.threshold;
    rep.auc = compute_auc(scores, labels);
    rep.n_bonafide = static_cast<std::size_t>(c.bonafide);
    rep.n_spoof = static_cast<std::size_t>(c.spoof);
    return rep;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

SignificanceResult bootstrap_significance(std::span<const double> scores_a,
                                          std::span<const double> scores_b,
                                          std::span<const Label> labels, std::size_t n_bootstrap,
                                          std::uint64_t seed, double alpha) {
    if (scores_a.size() != labels.size() || scores_b.size() != labels.size()) {
        throw ValidationError("bootstrap inputs must be aligned");
    }
    if (n_bootstrap == 0) {
        throw ValidationError("bootstrap needs at least one replicate");
    }
    SignificanceResult res;
    res.n_bootstrap = n_bootstrap;
    res.significant_at = alpha;
    res.eer_a = compute_eer(scores_a, labels).eer;
    res.eer_b = compute_eer(scores_b, labels).eer;

    const std::size_t n = labels.size();
    const std::size_t max_redraws = 10 * n_bootstrap;
    std::vector<double> ra(n), rb(n);
    std::vector<Label> rl(n);
    std::size_t not_better = 0;
    for (std::size_t rep = 0; rep < n_bootstrap; ++rep) {
        std::mt19937_64 rng(mix_seed(seed, rep));
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        while (true) {
            bool has_bona = false;
            bool has_spoof = false;
            for (std::size_t i = 0; i < n; ++i) {
                std::size_t j = pick(rng);
                ra[i] = scores_a[j];
                rb[i] = scores_b[j];
                rl[i] = labels[j];
                has_bona |= rl[i] == Label::bonafide;
                has_spoof |= rl[i] == Label::spoof;
            }
            if (has_bona && has_spoof) break;
            if (++res.redraws > max_redraws) {
                throw ValidationError("bootstrap aborted: too many single-class resamples");
            }
        }
        const double delta = compute_eer(rb, rl).eer - compute_eer(ra, rl).eer;
        if (delta <= 0.0) ++not_better;
    }
    res.p_value = static_cast<double>(not_better) / static_cast<double>(n_bootstrap);
    return res;
}

double relative_reduction(double eer_new, double eer_ref) {
    if (!(eer_ref > 0.0)) {
        throw ValidationError("relative reduction needs a positive reference EER");
    }
    return (eer_ref - eer_new) / eer_ref;
}

nlohmann::json to_json(const EvalReport& report) {
    nlohmann::json j;
    j["eer"] = report.eer;
    j["eer_threshold"] = report.eer_threshold;
    j["auc"] = report.auc;
    j["n_bonafide"] = report.n_bonafide;
    j["n_spoof"] = report.n_spoof;
    return j;
}

nlohmann::json to_json(const SignificanceResult& result) {
    nlohmann::json j;
    j["p_value"] = result.p_value;
    j["n_bootstrap"] = result.n_bootstrap;
    j["eer_a"] = result.eer_a;
    j["eer_b"] = result.eer_b;
    j["significant_at"] = result.significant_at;
    j["significant"] = result.significant();
    j["redraws"] = result.redraws;
    return j;
}

EvalReport eval_report_from_json(const nlohmann::json& j) {
    try {
        EvalReport r;
        r.eer = j.at("eer").get<double>();
        r.eer_threshold = j.value("eer_threshold", 0.0);
        r.auc = j.value("auc", 0.0);
        r.n_bonafide = j.value("n_bonafide", std::size_t{0});
        r.n_spoof = j.value("n_spoof", std::size_t{0});
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("invalid report JSON: ") + e.what());
    }
}

std::string det_csv(const std::vector<DetPoint>& points) {
    std::string out = "threshold,far,frr\n";
    for (const auto& p : points) {
        out += (std::isinf(p.threshold) ? std::string("inf") : format_double(p.threshold)) + "," +
               format_double(p.far) + "," + format_double(p.frr) + "\n";
    }
    return out;
}

}  // namespace mosfad
