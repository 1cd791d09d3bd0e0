#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mosfad/score_data.hpp"

namespace mosfad {

// Snaps a MOS value in [1,5] to the nearest point of the grid
// {1, 1 + step, ..., 5}; midpoints round up.
double quantize_mos(double x, double step = 0.125);

// Which MOS value a record is keyed on: the fused score or one component.
struct MosKey {
    static MosKey fused() { return MosKey{}; }
    static MosKey component(std::size_t k) { return MosKey{k}; }

    bool is_fused() const { return !index.has_value(); }
    std::string describe() const;

    std::optional<std::size_t> index;
};

// Fused if every record carries mos_fused, otherwise component 0.
MosKey default_key(const Dataset& ds);
MosKey parse_key(const std::string& text);

// Throws ValidationError naming the utt_id when the key cannot be resolved.
double keyed_mos(const ScoreRecord& record, const MosKey& key);

struct FilterConfig {
    double lo = 3.0;
    double hi = 4.0;
    bool inclusive = true;

    void validate() const;
    bool accepts(double mos) const;
};

Dataset filter_by_mos(const Dataset& ds, const MosKey& key, const FilterConfig& cfg = {});

struct BalanceReport {
    std::size_t total = 0;
    std::size_t n_bonafide = 0;
    std::size_t n_spoof = 0;
    std::size_t n_unknown = 0;
    // n_spoof / n_bonafide; empty when there is no bonafide record.
    std::optional<double> ratio;
};

BalanceReport balance_report(const Dataset& ds);
nlohmann::json to_json(const BalanceReport& report);

struct MosHistogram {
    double bin_width = 0.0;
    std::vector<double> edges;  // bins + 1 edges starting at 0
    std::vector<std::size_t> bonafide;
    std::vector<std::size_t> spoof;
    std::vector<std::size_t> unknown;

    std::size_t bins() const { return bonafide.size(); }
};

// Bins cover [0,5]; a value equal to the top edge lands in the last bin.
MosHistogram mos_histogram(const Dataset& ds, const MosKey& key, double bin_width);
nlohmann::json to_json(const MosHistogram& hist);
// Two-column CSV (bin_start,count) for one label.
std::string histogram_csv(const MosHistogram& hist, Label label);

}  // namespace mosfad
