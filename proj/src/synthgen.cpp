#include "mosfad/synthgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>
#include <set>

#include <boost/math/special_functions/erf.hpp>

#include "mosfad/error.hpp"
#include "mosfad/fusion_models.hpp"
#include "mosfad/io_util.hpp"
#include "mosfad/metrics.hpp"

namespace mosfad {

using nlohmann::json;

namespace {

constexpr double kRegimeSplit = 3.25;
constexpr std::size_t kLowRegimeSystems = 3;

void require(bool ok, const std::string& msg) {
    if (!ok) throw ValidationError("gen config: " + msg);
}

void validate_mixture(const std::vector<TruncNormal>& mix, const char* name) {
    require(!mix.empty(), std::string(name) + " needs at least one component");
    for (const auto& c : mix) {
        require(std::isfinite(c.mean), std::string(name) + " mean must be finite");
        require(c.sd > 0.0 && std::isfinite(c.sd), std::string(name) + " sd must be > 0");
        require(c.weight > 0.0 && std::isfinite(c.weight), std::string(name) + " weight must be > 0");
    }
}

// Standard normal CDF and its inverse.
double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
double norm_quantile(double p) { return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p); }

double log_norm_cdf(double x) {
    if (x > -30.0) return std::log(norm_cdf(x));
    // Mills-ratio asymptote; relative error below 1e-3 here.
    return -0.5 * x * x - std::log(-x) - 0.5 * std::log(2.0 * std::numbers::pi);
}

double log_norm_pdf(double x, double mean, double sd) {
    const double z = (x - mean) / sd;
    return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
}

// Uniform on the open interval (0, 1) built from the top 53 bits.
double uniform01(std::mt19937_64& rng) {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

double normal(std::mt19937_64& rng) { return norm_quantile(uniform01(rng)); }

double trunc_normal(const TruncNormal& c, std::mt19937_64& rng) {
    const double pa = norm_cdf((kMosMin - c.mean) / c.sd);
    const double pb = norm_cdf((kMosMax - c.mean) / c.sd);
    const double p = pa + uniform01(rng) * (pb - pa);
    const double x = c.mean + c.sd * norm_quantile(p);
    return std::clamp(x, kMosMin, kMosMax);
}

double sample_mixture(const std::vector<TruncNormal>& mix, std::mt19937_64& rng) {
    double total = 0.0;
    for (const auto& c : mix) total += c.weight;
    const double pick = uniform01(rng) * total;
    double acc = 0.0;
    for (const auto& c : mix) {
        acc += c.weight;
        if (pick < acc) return trunc_normal(c, rng);
    }
    return trunc_normal(mix.back(), rng);
}

double mixture_log_pdf(const std::vector<TruncNormal>& mix, double q) {
    double total = 0.0;
    for (const auto& c : mix) total += c.weight;
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> terms;
    terms.reserve(mix.size());
    for (const auto& c : mix) {
        const double mass = norm_cdf((kMosMax - c.mean) / c.sd) - norm_cdf((kMosMin - c.mean) / c.sd);
        const double t = std::log(c.weight / total) + log_norm_pdf(q, c.mean, c.sd) - std::log(mass);
        terms.push_back(t);
        best = std::max(best, t);
    }
    double s = 0.0;
    for (double t : terms) s += std::exp(t - best);
    return best + std::log(s);
}

struct LogSumExp {
    double max = -std::numeric_limits<double>::infinity();
    double sum = 0.0;

    void add(double x) {
        if (x == -std::numeric_limits<double>::infinity()) return;
        if (x <= max) {
            sum += std::exp(x - max);
        } else {
            sum = sum * std::exp(max - x) + 1.0;
            max = x;
        }
    }
    double value() const { return sum == 0.0 ? max : max + std::log(sum); }
};

struct Rule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// Gauss-Hermite for weight exp(-x^2), by Newton iteration on the
// orthonormal recurrence.
Rule gauss_hermite(std::size_t n) {
    Rule r{std::vector<double>(n), std::vector<double>(n)};
    const double pim4 = 1.0 / std::pow(std::numbers::pi, 0.25);
    const std::size_t m = (n + 1) / 2;
    double z = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double dn = static_cast<double>(n);
        if (i == 0) {
            z = std::sqrt(2.0 * dn + 1.0) - 1.85575 * std::pow(2.0 * dn + 1.0, -0.16667);
        } else if (i == 1) {
            z -= 1.14 * std::pow(dn, 0.426) / z;
        } else if (i == 2) {
            z = 1.86 * z - 0.86 * r.nodes[0];
        } else if (i == 3) {
            z = 1.91 * z - 0.91 * r.nodes[1];
        } else {
            z = 2.0 * z - r.nodes[i - 2];
        }
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = pim4, p2 = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double p3 = p2;
                p2 = p1;
                const double dj = static_cast<double>(j);
                p1 = z * std::sqrt(2.0 / (dj + 1.0)) * p2 - std::sqrt(dj / (dj + 1.0)) * p3;
            }
            pp = std::sqrt(2.0 * dn) * p2;
            const double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) <= 1e-14) break;
        }
        r.nodes[i] = z;
        r.nodes[n - 1 - i] = -z;
        r.weights[i] = r.weights[n - 1 - i] = 2.0 / (pp * pp);
    }
    return r;
}

// Gauss-Legendre on [-1, 1].
Rule gauss_legendre(std::size_t n) {
    Rule r{std::vector<double>(n), std::vector<double>(n)};
    const std::size_t m = (n + 1) / 2;
    const double dn = static_cast<double>(n);
    for (std::size_t i = 0; i < m; ++i) {
        double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (dn + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = 1.0, p2 = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double p3 = p2;
                p2 = p1;
                const double dj = static_cast<double>(j);
                p1 = ((2.0 * dj + 1.0) * z * p2 - dj * p3) / (dj + 1.0);
            }
            pp = dn * (z * p1 - p2) / (z * z - 1.0);
            const double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) <= 1e-15) break;
        }
        r.nodes[i] = -z;
        r.nodes[n - 1 - i] = z;
        r.weights[i] = r.weights[n - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
    }
    return r;
}

constexpr std::size_t kHermiteNodes = 48;
constexpr std::size_t kLegendreNodes = 10;
constexpr double kMaxPieceWidth = 0.05;

const Rule& hermite_rule() {
    static const Rule r = gauss_hermite(kHermiteNodes);
    return r;
}

const Rule& legendre_rule() {
    static const Rule r = gauss_legendre(kLegendreNodes);
    return r;
}

double fad_logit(double f) {
    constexpr double lo = std::numeric_limits<double>::min();
    constexpr double hi = 1.0 - 0x1.0p-53;
    const double p = std::clamp(f, lo, hi);
    return std::log(p) - std::log1p(-p);
}

std::uint64_t split_stream(Split split) {
    switch (split) {
        case Split::train: return 1;
        case Split::valid: return 2;
        case Split::eval: return 3;
    }
    return 0;
}

std::size_t split_size(const GenConfig& cfg, Split split) {
    switch (split) {
        case Split::train: return cfg.n_train;
        case Split::valid: return cfg.n_valid;
        case Split::eval: return cfg.n_eval;
    }
    return 0;
}

json mixture_to_json(const std::vector<TruncNormal>& mix) {
    json arr = json::array();
    for (const auto& c : mix) arr.push_back({{"weight", c.weight}, {"mean", c.mean}, {"sd", c.sd}});
    return arr;
}

std::vector<TruncNormal> mixture_from_json(const json& j, const char* name) {
    require(j.is_array(), std::string(name) + " must be an array of {weight, mean, sd}");
    std::vector<TruncNormal> mix;
    for (const auto& c : j) {
        require(c.is_object(), std::string(name) + " components must be objects");
        TruncNormal t;
        for (const auto& [k, v] : c.items()) {
            if (k == "weight") t.weight = v.get<double>();
            else if (k == "mean") t.mean = v.get<double>();
            else if (k == "sd") t.sd = v.get<double>();
            else require(false, std::string(name) + ": unknown field '" + k + "'");
        }
        mix.push_back(t);
    }
    return mix;
}

}  // namespace

void GenConfig::validate() const {
    require(spoof_prior > 0.0 && spoof_prior < 1.0, "spoof_prior must lie in (0, 1)");
    validate_mixture(mos_bonafide, "mos_bonafide");
    validate_mixture(mos_spoof, "mos_spoof");
    require(n_fad_systems >= 1, "n_fad_systems must be >= 1");
    require(n_mos_systems >= 1, "n_mos_systems must be >= 1");
    require(system_regimes.empty() || system_regimes.size() == n_fad_systems,
            "system_regimes must have one entry per FAD system");
    for (const auto& r : system_regimes) {
        require(r.lo >= 0.0 && r.hi <= 5.0 && r.lo <= r.hi, "regimes must satisfy 0 <= lo <= hi <= 5");
    }
    require(std::isfinite(informative_slope), "informative_slope must be finite");
    for (double sd : {informative_noise_sd, uninformative_noise_sd, shared_noise_sd, mos_obs_sd}) {
        require(sd > 0.0 && std::isfinite(sd), "noise standard deviations must be > 0");
    }
}

std::vector<Regime> GenConfig::regimes() const {
    if (!system_regimes.empty()) return system_regimes;
    std::vector<Regime> out(n_fad_systems);
    for (std::size_t i = 0; i < n_fad_systems; ++i) {
        out[i] = i < kLowRegimeSystems ? Regime{kMosMin, kRegimeSplit} : Regime{kRegimeSplit, kMosMax};
    }
    return out;
}

json to_json(const GenConfig& cfg) {
    json regimes = json::array();
    for (const auto& r : cfg.regimes()) regimes.push_back({r.lo, r.hi});
    return {{"n_train", cfg.n_train},
            {"n_valid", cfg.n_valid},
            {"n_eval", cfg.n_eval},
            {"spoof_prior", cfg.spoof_prior},
            {"mos_bonafide", mixture_to_json(cfg.mos_bonafide)},
            {"mos_spoof", mixture_to_json(cfg.mos_spoof)},
            {"n_fad_systems", cfg.n_fad_systems},
            {"n_mos_systems", cfg.n_mos_systems},
            {"system_regimes", regimes},
            {"informative_slope", cfg.informative_slope},
            {"informative_noise_sd", cfg.informative_noise_sd},
            {"uninformative_noise_sd", cfg.uninformative_noise_sd},
            {"shared_noise_sd", cfg.shared_noise_sd},
            {"mos_obs_sd", cfg.mos_obs_sd},
            {"seed", cfg.seed}};
}

GenConfig gen_config_from_json(const json& j) {
    require(j.is_object(), "top level must be an object");
    GenConfig cfg;
    try {
        for (const auto& [k, v] : j.items()) {
            if (k == "n_train") cfg.n_train = v.get<std::size_t>();
            else if (k == "n_valid") cfg.n_valid = v.get<std::size_t>();
            else if (k == "n_eval") cfg.n_eval = v.get<std::size_t>();
            else if (k == "spoof_prior") cfg.spoof_prior = v.get<double>();
            else if (k == "mos_bonafide") cfg.mos_bonafide = mixture_from_json(v, "mos_bonafide");
            else if (k == "mos_spoof") cfg.mos_spoof = mixture_from_json(v, "mos_spoof");
            else if (k == "n_fad_systems") cfg.n_fad_systems = v.get<std::size_t>();
            else if (k == "n_mos_systems") cfg.n_mos_systems = v.get<std::size_t>();
            else if (k == "system_regimes") {
                require(v.is_array(), "system_regimes must be an array of [lo, hi]");
                cfg.system_regimes.clear();
                for (const auto& r : v) {
                    require(r.is_array() && r.size() == 2, "each regime must be [lo, hi]");
                    cfg.system_regimes.push_back({r[0].get<double>(), r[1].get<double>()});
                }
            }
            else if (k == "informative_slope") cfg.informative_slope = v.get<double>();
            else if (k == "informative_noise_sd") cfg.informative_noise_sd = v.get<double>();
            else if (k == "uninformative_noise_sd") cfg.uninformative_noise_sd = v.get<double>();
            else if (k == "shared_noise_sd") cfg.shared_noise_sd = v.get<double>();
            else if (k == "mos_obs_sd") cfg.mos_obs_sd = v.get<double>();
            else if (k == "seed") cfg.seed = v.get<std::uint64_t>();
            else require(false, "unknown field '" + k + "'");
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("gen config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

GenConfig load_gen_config(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    return gen_config_from_json(j);
}

ScoreRecord generate_record(const GenConfig& cfg, Split split, std::size_t index) {
    std::mt19937_64 rng(mix_seed(mix_seed(cfg.seed, split_stream(split)), index));
    ScoreRecord r;
    char id[32];
    std::snprintf(id, sizeof id, "%s_%07zu", std::string(to_string(split)).c_str(), index);
    r.utt_id = id;
    r.split = split;
    const bool spoof = uniform01(rng) < cfg.spoof_prior;
    r.label = spoof ? Label::spoof : Label::bonafide;
    const double q = sample_mixture(spoof ? cfg.mos_spoof : cfg.mos_bonafide, rng);

    r.mos.resize(cfg.n_mos_systems);
    double sum = 0.0;
    for (auto& m : r.mos) {
        m = std::clamp(q + cfg.mos_obs_sd * normal(rng), 0.0, 5.0);
        sum += m;
    }
    r.mos_fused = std::clamp(sum / static_cast<double>(cfg.n_mos_systems), 0.0, 5.0);

    const double s = spoof ? 1.0 : -1.0;
    const double u = cfg.shared_noise_sd * normal(rng);
    const auto regimes = cfg.regimes();
    r.fad.resize(cfg.n_fad_systems);
    for (std::size_t i = 0; i < cfg.n_fad_systems; ++i) {
        const double e = normal(rng);
        const bool informative = q >= regimes[i].lo && q <= regimes[i].hi;
        const double z = informative ? -cfg.informative_slope * s + u + cfg.informative_noise_sd * e
                                     : u + cfg.uninformative_noise_sd * e;
        r.fad[i] = sigmoid(z);
    }
    return r;
}

Dataset generate_split(const GenConfig& cfg, Split split) {
    cfg.validate();
    const std::size_t n = split_size(cfg, split);
    std::vector<ScoreRecord> records;
    records.reserve(n);
    for (std::size_t i = 0; i < n; ++i) records.push_back(generate_record(cfg, split, i));
    return Dataset(std::move(records), cfg.n_fad_systems, cfg.n_mos_systems);
}

Corpus generate(const GenConfig& cfg) {
    return {generate_split(cfg, Split::train), generate_split(cfg, Split::valid),
            generate_split(cfg, Split::eval)};
}

namespace {

struct Segment {
    double lo, hi;
    std::vector<bool> informative;
};

std::vector<Segment> segments(const GenConfig& cfg) {
    const auto regimes = cfg.regimes();
    std::set<double> cuts{kMosMin, kMosMax};
    for (const auto& r : regimes) {
        for (double c : {r.lo, r.hi}) {
            if (c > kMosMin && c < kMosMax) cuts.insert(c);
        }
    }
    std::vector<Segment> out;
    for (auto it = cuts.begin(); std::next(it) != cuts.end(); ++it) {
        Segment seg{*it, *std::next(it), {}};
        const double mid = 0.5 * (seg.lo + seg.hi);
        for (const auto& r : regimes) seg.informative.push_back(mid >= r.lo && mid <= r.hi);
        out.push_back(std::move(seg));
    }
    return out;
}

// log of  E_u prod_i N(z_i; mean_i + u, sd_i)  for one label and membership set.
double fad_log_likelihood(const GenConfig& cfg, const std::vector<double>& z,
                          const std::vector<bool>& informative, double s) {
    const Rule& gh = hermite_rule();
    LogSumExp acc;
    for (std::size_t h = 0; h < gh.nodes.size(); ++h) {
        const double u = std::numbers::sqrt2 * cfg.shared_noise_sd * gh.nodes[h];
        double lp = std::log(gh.weights[h]) - 0.5 * std::log(std::numbers::pi);
        for (std::size_t i = 0; i < z.size(); ++i) {
            lp += informative[i]
                      ? log_norm_pdf(z[i], -cfg.informative_slope * s + u, cfg.informative_noise_sd)
                      : log_norm_pdf(z[i], u, cfg.uninformative_noise_sd);
        }
        acc.add(lp);
    }
    return acc.value();
}

double mos_obs_log_likelihood(const GenConfig& cfg, const std::vector<double>& mos, double q) {
    double lp = 0.0;
    for (double m : mos) {
        if (m >= 5.0) {
            lp += log_norm_cdf((q - 5.0) / cfg.mos_obs_sd);
        } else if (m <= 0.0) {
            lp += log_norm_cdf((0.0 - q) / cfg.mos_obs_sd);
        } else {
            lp += log_norm_pdf(m, q, cfg.mos_obs_sd);
        }
    }
    return lp;
}

}  // namespace

namespace {

struct QuadNode {
    double q;
    double log_bona;   // log weight + log prior density, bonafide
    double log_spoof;  // same for spoof
};

struct OracleTables {
    std::vector<Segment> segs;
    std::vector<std::vector<QuadNode>> nodes;  // per segment
};

OracleTables build_tables(const GenConfig& cfg) {
    cfg.validate();
    const Rule& gl = legendre_rule();
    OracleTables t;
    t.segs = segments(cfg);
    for (const auto& seg : t.segs) {
        std::vector<QuadNode> nodes;
        const auto pieces = static_cast<std::size_t>(std::ceil((seg.hi - seg.lo) / kMaxPieceWidth));
        const double width = (seg.hi - seg.lo) / static_cast<double>(pieces);
        for (std::size_t p = 0; p < pieces; ++p) {
            const double a = seg.lo + width * static_cast<double>(p);
            for (std::size_t k = 0; k < gl.nodes.size(); ++k) {
                const double q = a + 0.5 * width * (gl.nodes[k] + 1.0);
                const double lw = std::log(0.5 * width * gl.weights[k]);
                nodes.push_back({q, lw + mixture_log_pdf(cfg.mos_bonafide, q),
                                 lw + mixture_log_pdf(cfg.mos_spoof, q)});
            }
        }
        t.nodes.push_back(std::move(nodes));
    }
    return t;
}

double posterior_with(const GenConfig& cfg, const OracleTables& t, const ScoreRecord& r) {
    if (r.fad.size() != cfg.n_fad_systems || r.mos.size() != cfg.n_mos_systems) {
        throw ValidationError("record '" + r.utt_id + "' does not match generator dimensions");
    }
    std::vector<double> z(r.fad.size());
    std::transform(r.fad.begin(), r.fad.end(), z.begin(), fad_logit);

    LogSumExp bona, spoof;
    for (std::size_t s = 0; s < t.segs.size(); ++s) {
        const double fb = fad_log_likelihood(cfg, z, t.segs[s].informative, -1.0);
        const double fs = fad_log_likelihood(cfg, z, t.segs[s].informative, 1.0);
        for (const auto& node : t.nodes[s]) {
            const double lm = mos_obs_log_likelihood(cfg, r.mos, node.q);
            bona.add(lm + node.log_bona + fb);
            spoof.add(lm + node.log_spoof + fs);
        }
    }
    const double log_odds = std::log1p(-cfg.spoof_prior) + bona.value() -
                            std::log(cfg.spoof_prior) - spoof.value();
    if (std::isnan(log_odds)) return 0.5;
    return sigmoid(log_odds);
}

}  // namespace

double bayes_posterior(const GenConfig& cfg, const ScoreRecord& r) {
    return posterior_with(cfg, build_tables(cfg), r);
}

std::vector<double> bayes_posteriors(const GenConfig& cfg, const Dataset& ds) {
    const auto tables = build_tables(cfg);
    std::vector<double> out;
    out.reserve(ds.size());
    for (const auto& r : ds) out.push_back(posterior_with(cfg, tables, r));
    return out;
}

double oracle_eer(const GenConfig& cfg, const Dataset& ds) {
    const auto scores = bayes_posteriors(cfg, ds);
    std::vector<Label> labels;
    labels.reserve(ds.size());
    for (const auto& r : ds) labels.push_back(r.label);
    return compute_eer(scores, labels).eer;
}

double mean_fad_correlation(const Dataset& ds) {
    const std::size_t n = ds.size();
    const std::size_t d = ds.fad_dim();
    if (n < 2 || d < 2) throw ValidationError("correlation needs at least two records and two systems");
    std::vector<double> mean(d, 0.0);
    for (const auto& r : ds) {
        for (std::size_t i = 0; i < d; ++i) mean[i] += r.fad[i];
    }
    for (auto& m : mean) m /= static_cast<double>(n);
    std::vector<double> cov(d * d, 0.0);
    for (const auto& r : ds) {
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = i; j < d; ++j) {
                cov[i * d + j] += (r.fad[i] - mean[i]) * (r.fad[j] - mean[j]);
            }
        }
    }
    double total = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i + 1; j < d; ++j) {
            total += cov[i * d + j] / std::sqrt(cov[i * d + i] * cov[j * d + j]);
        }
    }
    return total / static_cast<double>(d * (d - 1) / 2);
}

}  // namespace mosfad
