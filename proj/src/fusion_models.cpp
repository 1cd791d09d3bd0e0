#include "mosfad/fusion_models.hpp"

#include <algorithm>
#include <string>

#include "mosfad/error.hpp"
#include "mosfad/io_util.hpp"

namespace mosfad {

namespace {

void check_dim(std::size_t got, std::size_t want, const char* what) {
    if (got != want) {
        throw ValidationError(std::string(what) + " dimension " + std::to_string(got) +
                              " does not match model dimension " + std::to_string(want));
    }
}

void fill_uniform(std::vector<double>& v, std::size_t fan_in, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& x : v) x = dist(rng);
}

// log(1 + exp(o)) without overflow.
double softplus(double o) {
    return o > 0.0 ? o + std::log1p(std::exp(-o)) : std::log1p(std::exp(o));
}

// Binary cross-entropy written on the output logit.
double bce_on_logit(double logit, double target) {
    return softplus(logit) - target * logit;
}

// Shared forward/backward of the plain MLP. When `grad` is null only the loss
// is computed. When dx is non-empty it receives dLoss/dx (unscaled).
double mlp_pass(const MlpParams& p, std::span<const double> x, double target, MlpParams* grad,
                double scale, std::span<double> dx) {
    thread_local std::vector<double> hidden;
    hidden.resize(p.hidden_dim);
    double logit = p.b2;
    for (std::size_t j = 0; j < p.hidden_dim; ++j) {
        const double* row = p.w1.data() + j * p.in_dim;
        double a = 0.0;
        for (std::size_t k = 0; k < p.in_dim; ++k) a += row[k] * x[k];
        hidden[j] = sigmoid(a);
        logit += p.w2[j] * hidden[j];
    }
    const double loss = bce_on_logit(logit, target);
    if (grad == nullptr && dx.empty()) return loss;

    const double d_logit = sigmoid(logit) - target;
    if (!dx.empty()) std::fill(dx.begin(), dx.end(), 0.0);
    for (std::size_t j = 0; j < p.hidden_dim; ++j) {
        const double h = hidden[j];
        const double d_pre = d_logit * p.w2[j] * h * (1.0 - h);
        const double* row = p.w1.data() + j * p.in_dim;
        if (grad != nullptr) {
            grad->w2[j] += scale * d_logit * h;
            double* grow = grad->w1.data() + j * p.in_dim;
            const double s = scale * d_pre;
            for (std::size_t k = 0; k < p.in_dim; ++k) grow[k] += s * x[k];
        }
        if (!dx.empty()) {
            for (std::size_t k = 0; k < p.in_dim; ++k) dx[k] += d_pre * row[k];
        }
    }
    if (grad != nullptr) grad->b2 += scale * d_logit;
    return loss;
}

void gate_values(const GatedMlpParams& p, std::span<const double> mos, std::span<double> gate) {
    for (std::size_t i = 0; i < p.fad_dim; ++i) {
        const double* row = p.wd.data() + i * p.gate_dim;
        double a = p.bd[i];
        for (std::size_t k = 0; k < p.gate_dim; ++k) a += row[k] * mos[k];
        gate[i] = sigmoid(a);
    }
}

double gated_pass(const GatedMlpParams& p, std::span<const double> fad,
                  std::span<const double> mos, double target, GatedMlpParams* grad, double scale) {
    check_dim(fad.size(), p.fad_dim, "FAD input");
    check_dim(mos.size(), p.gate_dim, "gate input");
    thread_local std::vector<double> gate;
    thread_local std::vector<double> gated;
    thread_local std::vector<double> dx;
    gate.resize(p.fad_dim);
    gated.resize(p.fad_dim);
    gate_values(p, mos, gate);
    for (std::size_t i = 0; i < p.fad_dim; ++i) gated[i] = fad[i] * gate[i];
    if (grad == nullptr) return mlp_pass(p.inner, gated, target, nullptr, 0.0, {});

    dx.resize(p.fad_dim);
    const double loss = mlp_pass(p.inner, gated, target, &grad->inner, scale, dx);
    for (std::size_t i = 0; i < p.fad_dim; ++i) {
        const double g = gate[i];
        const double d_pre = scale * dx[i] * fad[i] * g * (1.0 - g);
        grad->bd[i] += d_pre;
        double* row = grad->wd.data() + i * p.gate_dim;
        for (std::size_t k = 0; k < p.gate_dim; ++k) row[k] += d_pre * mos[k];
    }
    return loss;
}

}  // namespace

// ---------------------------------------------------------------------------

MlpParams MlpParams::zeros(std::size_t in_dim, std::size_t hidden_dim) {
    if (in_dim == 0 || hidden_dim == 0) {
        throw ValidationError("MLP dimensions must be positive");
    }
    MlpParams p;
    p.in_dim = in_dim;
    p.hidden_dim = hidden_dim;
    p.w1.assign(in_dim * hidden_dim, 0.0);
    p.w2.assign(hidden_dim, 0.0);
    p.b2 = 0.0;
    return p;
}

MlpParams MlpParams::init(std::size_t in_dim, std::size_t hidden_dim, std::mt19937_64& rng) {
    MlpParams p = zeros(in_dim, hidden_dim);
    fill_uniform(p.w1, in_dim, rng);
    fill_uniform(p.w2, hidden_dim, rng);
    return p;
}

std::vector<std::span<double>> MlpParams::blocks() {
    return {std::span<double>(w1), std::span<double>(w2), std::span<double>(&b2, 1)};
}

std::vector<std::span<const double>> MlpParams::blocks() const {
    return {std::span<const double>(w1), std::span<const double>(w2),
            std::span<const double>(&b2, 1)};
}

GatedMlpParams GatedMlpParams::zeros(std::size_t fad_dim, std::size_t gate_dim,
                                     std::size_t hidden_dim) {
    if (gate_dim == 0) {
        throw ValidationError("gate input dimension must be positive");
    }
    GatedMlpParams p;
    p.fad_dim = fad_dim;
    p.gate_dim = gate_dim;
    p.inner = MlpParams::zeros(fad_dim, hidden_dim);
    p.wd.assign(fad_dim * gate_dim, 0.0);
    p.bd.assign(fad_dim, 0.0);
    return p;
}

GatedMlpParams GatedMlpParams::init(std::size_t fad_dim, std::size_t gate_dim,
                                    std::size_t hidden_dim, std::mt19937_64& rng) {
    GatedMlpParams p = zeros(fad_dim, gate_dim, hidden_dim);
    fill_uniform(p.wd, gate_dim, rng);
    p.inner = MlpParams::init(fad_dim, hidden_dim, rng);
    return p;
}

std::vector<std::span<double>> GatedMlpParams::blocks() {
    std::vector<std::span<double>> out{std::span<double>(wd), std::span<double>(bd)};
    for (auto b : inner.blocks()) out.push_back(b);
    return out;
}

std::vector<std::span<const double>> GatedMlpParams::blocks() const {
    std::vector<std::span<const double>> out{std::span<const double>(wd),
                                             std::span<const double>(bd)};
    for (auto b : inner.blocks()) out.push_back(b);
    return out;
}

MosFuserParams MosFuserParams::init(std::size_t mos_dim, std::mt19937_64& rng) {
    if (mos_dim == 0) {
        throw ValidationError("MOS fuser needs at least one MOS input");
    }
    MosFuserParams p;
    p.w.assign(mos_dim, 0.0);
    fill_uniform(p.w, mos_dim, rng);
    p.a = 1.0;
    p.b = 0.0;
    return p;
}

std::vector<std::span<double>> MosFuserParams::blocks() {
    return {std::span<double>(w), std::span<double>(&a, 1), std::span<double>(&b, 1)};
}

std::vector<std::span<const double>> MosFuserParams::blocks() const {
    return {std::span<const double>(w), std::span<const double>(&a, 1),
            std::span<const double>(&b, 1)};
}

void ThresholdConfig::validate() const {
    if (!(m1 >= 0.0 && m1 < m2 && m2 <= 5.0)) {
        throw ValidationError("threshold config must satisfy 0 <= m1 < m2 <= 5 (got " +
                              format_double(m1) + ", " + format_double(m2) + ")");
    }
}

// ---------------------------------------------------------------------------

double mlp_forward(const MlpParams& p, std::span<const double> x) {
    check_dim(x.size(), p.in_dim, "MLP input");
    double logit = p.b2;
    for (std::size_t j = 0; j < p.hidden_dim; ++j) {
        const double* row = p.w1.data() + j * p.in_dim;
        double a = 0.0;
        for (std::size_t k = 0; k < p.in_dim; ++k) a += row[k] * x[k];
        logit += p.w2[j] * sigmoid(a);
    }
    return sigmoid(logit);
}

GatedOutput gated_mlp_forward(const GatedMlpParams& p, std::span<const double> fad,
                              std::span<const double> mos) {
    check_dim(fad.size(), p.fad_dim, "FAD input");
    check_dim(mos.size(), p.gate_dim, "gate input");
    GatedOutput out;
    out.gate.resize(p.fad_dim);
    gate_values(p, mos, out.gate);
    std::vector<double> gated(p.fad_dim);
    for (std::size_t i = 0; i < p.fad_dim; ++i) gated[i] = fad[i] * out.gate[i];
    out.score = mlp_forward(p.inner, gated);
    return out;
}

double mos_fuser_raw(const MosFuserParams& p, std::span<const double> mos) {
    check_dim(mos.size(), p.w.size(), "MOS input");
    double s = 0.0;
    for (std::size_t k = 0; k < mos.size(); ++k) s += p.w[k] * mos[k];
    return p.a * s + p.b;
}

double mos_fuser_forward(const MosFuserParams& p, std::span<const double> mos) {
    return std::clamp(mos_fuser_raw(p, mos), 0.0, 5.0);
}

double apply_threshold(const ThresholdConfig& cfg, double mos_fused, double base_score) {
    if (mos_fused < cfg.m1) return 0.0;
    if (mos_fused > cfg.m2) return 1.0;
    return base_score;
}

double mlp_loss_grad(const MlpParams& p, std::span<const double> x, double target,
                     MlpParams& grad, double scale) {
    check_dim(x.size(), p.in_dim, "MLP input");
    return mlp_pass(p, x, target, &grad, scale, {});
}

double gated_mlp_loss_grad(const GatedMlpParams& p, std::span<const double> fad,
                           std::span<const double> mos, double target, GatedMlpParams& grad,
                           double scale) {
    return gated_pass(p, fad, mos, target, &grad, scale);
}

double mos_fuser_loss_grad(const MosFuserParams& p, std::span<const double> mos, double target,
                           MosFuserParams& grad, double scale) {
    check_dim(mos.size(), p.w.size(), "MOS input");
    double s = 0.0;
    for (std::size_t k = 0; k < mos.size(); ++k) s += p.w[k] * mos[k];
    const double resid = p.a * s + p.b - target;
    const double d_raw = scale * 2.0 * resid;
    for (std::size_t k = 0; k < mos.size(); ++k) grad.w[k] += d_raw * p.a * mos[k];
    grad.a += d_raw * s;
    grad.b += d_raw;
    return resid * resid;
}

double mlp_loss(const MlpParams& p, std::span<const double> x, double target) {
    check_dim(x.size(), p.in_dim, "MLP input");
    return mlp_pass(p, x, target, nullptr, 0.0, {});
}

double gated_mlp_loss(const GatedMlpParams& p, std::span<const double> fad,
                      std::span<const double> mos, double target) {
    return gated_pass(p, fad, mos, target, nullptr, 0.0);
}

double mos_fuser_loss(const MosFuserParams& p, std::span<const double> mos, double target) {
    const double resid = mos_fuser_raw(p, mos) - target;
    return resid * resid;
}

}  // namespace mosfad
