#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mosfad/score_data.hpp"

namespace mosfad {

// Dense row-major matrix of per-record model inputs.
struct FeatureMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    std::span<const double> row(std::size_t i) const {
        return {data.data() + i * cols, cols};
    }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

// What an ungated model sees: FAD scores alone (FAD fusion), FAD scores plus
// the fused MOS (MOS-FAD score fusion), or FAD scores plus the full MOS vector.
enum class FeatureSet { fad, fad_fused, fad_mos };
// What drives the gate decoder: the fused MOS scalar or the MOS vector.
enum class GateInput { fused, mos };

std::string_view to_string(FeatureSet fs);
std::string_view to_string(GateInput gi);
FeatureSet parse_feature_set(std::string_view text);
GateInput parse_gate_input(std::string_view text);

std::size_t feature_dim(std::size_t fad_dim, std::size_t mos_dim, FeatureSet fs);
std::size_t gate_dim(std::size_t mos_dim, GateInput gi);

// Throws ValidationError naming the record when mos_fused is absent.
double fused_mos(const ScoreRecord& r);

FeatureMatrix feature_matrix(const Dataset& ds, FeatureSet fs);
FeatureMatrix fad_matrix(const Dataset& ds);
FeatureMatrix gate_matrix(const Dataset& ds, GateInput gi);
FeatureMatrix mos_matrix(const Dataset& ds);

// bonafide -> 1, spoof -> 0; unknown labels are rejected.
std::vector<double> binary_targets(const Dataset& ds);
std::vector<Label> labels_of(const Dataset& ds);

}  // namespace mosfad
