#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <vector>

namespace mosfad {

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Two-layer perceptron: h = sigmoid(W1 x) without a first-layer bias,
// score = sigmoid(w2 . h + b2) with a single output unit.
struct MlpParams {
    std::size_t in_dim = 0;
    std::size_t hidden_dim = 3;
    std::vector<double> w1;  // hidden_dim x in_dim, row-major
    std::vector<double> w2;  // hidden_dim
    double b2 = 0.0;

    static MlpParams zeros(std::size_t in_dim, std::size_t hidden_dim);
    // Weights uniform in +-1/sqrt(fan_in), b2 = 0.
    static MlpParams init(std::size_t in_dim, std::size_t hidden_dim, std::mt19937_64& rng);

    std::vector<std::span<double>> blocks();
    std::vector<std::span<const double>> blocks() const;
    bool operator==(const MlpParams&) const = default;
};

// Gate g = sigmoid(Wd mos + bd) scales the FAD scores elementwise before the
// inner MLP. gate_dim is 1 when gating on the fused MOS.
struct GatedMlpParams {
    std::size_t fad_dim = 0;
    std::size_t gate_dim = 1;
    std::vector<double> wd;  // fad_dim x gate_dim, row-major
    std::vector<double> bd;  // fad_dim
    MlpParams inner;

    static GatedMlpParams zeros(std::size_t fad_dim, std::size_t gate_dim, std::size_t hidden_dim);
    static GatedMlpParams init(std::size_t fad_dim, std::size_t gate_dim, std::size_t hidden_dim,
                               std::mt19937_64& rng);

    std::vector<std::span<double>> blocks();
    std::vector<std::span<const double>> blocks() const;
    bool operator==(const GatedMlpParams&) const = default;
};

// MOS fuser: a bias-free weighting layer followed by an affine residual map,
// z_f = clamp(a * (w . mos) + b, 0, 5).
struct MosFuserParams {
    std::vector<double> w;
    double a = 1.0;
    double b = 0.0;

    static MosFuserParams init(std::size_t mos_dim, std::mt19937_64& rng);

    std::vector<std::span<double>> blocks();
    std::vector<std::span<const double>> blocks() const;
    bool operator==(const MosFuserParams&) const = default;
};

struct ThresholdConfig {
    double m1 = 2.5;
    double m2 = 4.0;

    void validate() const;
    bool operator==(const ThresholdConfig&) const = default;
};

double mlp_forward(const MlpParams& p, std::span<const double> x);

struct GatedOutput {
    double score = 0.0;
    std::vector<double> gate;
};
GatedOutput gated_mlp_forward(const GatedMlpParams& p, std::span<const double> fad,
                              std::span<const double> mos);

double mos_fuser_raw(const MosFuserParams& p, std::span<const double> mos);
double mos_fuser_forward(const MosFuserParams& p, std::span<const double> mos);

// 0 below m1, 1 above m2, base_score untouched otherwise (boundaries included).
double apply_threshold(const ThresholdConfig& cfg, double mos_fused, double base_score);

// Loss plus gradient accumulation. Each adds scale * dLoss/dparam into `grad`
// (which must have the shape of `p`) and returns the unscaled loss. The
// classifiers use binary cross-entropy against target in {0,1}; the fuser
// uses squared error of the unclamped output against a MOS target.
double mlp_loss_grad(const MlpParams& p, std::span<const double> x, double target,
                     MlpParams& grad, double scale);
double gated_mlp_loss_grad(const GatedMlpParams& p, std::span<const double> fad,
                           std::span<const double> mos, double target, GatedMlpParams& grad,
                           double scale);
double mos_fuser_loss_grad(const MosFuserParams& p, std::span<const double> mos, double target,
                           MosFuserParams& grad, double scale);

double mlp_loss(const MlpParams& p, std::span<const double> x, double target);
double gated_mlp_loss(const GatedMlpParams& p, std::span<const double> fad,
                      std::span<const double> mos, double target);
double mos_fuser_loss(const MosFuserParams& p, std::span<const double> mos, double target);

// -- parameter block helpers ------------------------------------------------

template <class P>
std::size_t param_count(const P& p) {
    std::size_t n = 0;
    for (auto b : p.blocks()) n += b.size();
    return n;
}

template <class P>
std::vector<double> flatten(const P& p) {
    std::vector<double> out;
    out.reserve(param_count(p));
    for (auto b : p.blocks()) out.insert(out.end(), b.begin(), b.end());
    return out;
}

template <class P>
void unflatten(P& p, std::span<const double> values) {
    std::size_t k = 0;
    for (auto b : p.blocks()) {
        for (double& v : b) v = values[k++];
    }
}

template <class P>
void zero_params(P& p) {
    for (auto b : p.blocks()) {
        for (double& v : b) v = 0.0;
    }
}

// p += alpha * g, block by block.
template <class P>
void axpy_params(P& p, const P& g, double alpha) {
    auto dst = p.blocks();
    auto src = g.blocks();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        for (std::size_t j = 0; j < dst[i].size(); ++j) dst[i][j] += alpha * src[i][j];
    }
}

template <class P>
bool params_finite(const P& p) {
    for (auto b : p.blocks()) {
        for (double v : b) {
            if (!std::isfinite(v)) return false;
        }
    }
    return true;
}

}  // namespace mosfad
