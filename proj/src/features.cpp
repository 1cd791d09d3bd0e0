#include "mosfad/features.hpp"

#include "mosfad/error.hpp"

namespace mosfad {

std::string_view to_string(FeatureSet fs) {
    switch (fs) {
        case FeatureSet::fad: return "fad";
        case FeatureSet::fad_fused: return "fad-mos";
        case FeatureSet::fad_mos: return "fad-mosvec";
    }
    return "fad";
}

std::string_view to_string(GateInput gi) {
    return gi == GateInput::fused ? "fused" : "mos";
}

FeatureSet parse_feature_set(std::string_view text) {
    if (text == "fad") return FeatureSet::fad;
    if (text == "fad-mos") return FeatureSet::fad_fused;
    if (text == "fad-mosvec") return FeatureSet::fad_mos;
    throw ValidationError("invalid feature set '" + std::string(text) +
                          "' (expected fad, fad-mos or fad-mosvec)");
}

GateInput parse_gate_input(std::string_view text) {
    if (text == "fused") return GateInput::fused;
    if (text == "mos") return GateInput::mos;
    throw ValidationError("invalid gate input '" + std::string(text) + "' (expected fused or mos)");
}

std::size_t feature_dim(std::size_t fad_dim, std::size_t mos_dim, FeatureSet fs) {
    switch (fs) {
        case FeatureSet::fad: return fad_dim;
        case FeatureSet::fad_fused: return fad_dim + 1;
        case FeatureSet::fad_mos: return fad_dim + mos_dim;
    }
    return fad_dim;
}

std::size_t gate_dim(std::size_t mos_dim, GateInput gi) {
    return gi == GateInput::fused ? 1 : mos_dim;
}

double fused_mos(const ScoreRecord& r) {
    if (!r.mos_fused) {
        throw ValidationError("record '" + r.utt_id + "' has no mos_fused");
    }
    return *r.mos_fused;
}

FeatureMatrix feature_matrix(const Dataset& ds, FeatureSet fs) {
    FeatureMatrix m;
    m.rows = ds.size();
    m.cols = feature_dim(ds.fad_dim(), ds.mos_dim(), fs);
    m.data.reserve(m.rows * m.cols);
    for (const auto& r : ds) {
        m.data.insert(m.data.end(), r.fad.begin(), r.fad.end());
        if (fs == FeatureSet::fad_fused) {
            m.data.push_back(fused_mos(r));
        } else if (fs == FeatureSet::fad_mos) {
            m.data.insert(m.data.end(), r.mos.begin(), r.mos.end());
        }
    }
    return m;
}

FeatureMatrix fad_matrix(const Dataset& ds) {
    return feature_matrix(ds, FeatureSet::fad);
}

FeatureMatrix gate_matrix(const Dataset& ds, GateInput gi) {
    if (gi == GateInput::mos) return mos_matrix(ds);
    FeatureMatrix m;
    m.rows = ds.size();
    m.cols = 1;
    m.data.reserve(m.rows);
    for (const auto& r : ds) m.data.push_back(fused_mos(r));
    return m;
}

FeatureMatrix mos_matrix(const Dataset& ds) {
    FeatureMatrix m;
    m.rows = ds.size();
    m.cols = ds.mos_dim();
    m.data.reserve(m.rows * m.cols);
    for (const auto& r : ds) m.data.insert(m.data.end(), r.mos.begin(), r.mos.end());
    return m;
}

std::vector<double> binary_targets(const Dataset& ds) {
    std::vector<double> t;
    t.reserve(ds.size());
    for (const auto& r : ds) {
        if (r.label == Label::unknown) {
            throw ValidationError("record '" + r.utt_id + "' is unlabeled");
        }
        t.push_back(r.label == Label::bonafide ? 1.0 : 0.0);
    }
    return t;
}

std::vector<Label> labels_of(const Dataset& ds) {
    std::vector<Label> out;
    out.reserve(ds.size());
    for (const auto& r : ds) out.push_back(r.label);
    return out;
}

}  // namespace mosfad
