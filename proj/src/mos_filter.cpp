#include "mosfad/mos_filter.hpp"

#include <cmath>

#include "mosfad/error.hpp"
#include "mosfad/io_util.hpp"

namespace mosfad {

double quantize_mos(double x, double step) {
    if (!(step > 0.0)) {
        throw ValidationError("quantization step must be positive");
    }
    double intervals = 4.0 / step;
    if (std::abs(intervals - std::round(intervals)) > 1e-9) {
        throw ValidationError("quantization step " + format_double(step) +
                              " does not divide [1,5] evenly");
    }
    if (!(x >= 1.0 && x <= 5.0)) {
        throw ValidationError("MOS value " + format_double(x) + " outside [1,5]");
    }
    double k = std::floor((x - 1.0) / step + 0.5);
    k = std::min(k, std::round(intervals));
    return 1.0 + k * step;
}

std::string MosKey::describe() const {
    return is_fused() ? std::string("fused") : "mos[" + std::to_string(*index) + "]";
}

MosKey default_key(const Dataset& ds) {
    for (const auto& r : ds) {
        if (!r.mos_fused) return MosKey::component(0);
    }
    return MosKey::fused();
}

MosKey parse_key(const std::string& text) {
    if (text == "fused") return MosKey::fused();
    std::size_t pos = 0;
    unsigned long k = 0;
    try {
        k = std::stoul(text, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos == 0 || pos != text.size()) {
        throw ValidationError("invalid MOS key '" + text + "' (expected 'fused' or an index)");
    }
    return MosKey::component(k);
}

double keyed_mos(const ScoreRecord& record, const MosKey& key) {
    if (key.is_fused()) {
        if (!record.mos_fused) {
            throw ValidationError("record '" + record.utt_id + "' has no mos_fused");
        }
        return *record.mos_fused;
    }
    if (*key.index >= record.mos.size()) {
        throw ValidationError("record '" + record.utt_id + "' has no MOS component " +
                              std::to_string(*key.index));
    }
    return record.mos[*key.index];
}

void FilterConfig::validate() const {
    if (!(lo >= 0.0 && hi <= 5.0 && lo < hi)) {
        throw ValidationError("filter bounds must satisfy 0 <= lo < hi <= 5 (got " +
                              format_double(lo) + ", " + format_double(hi) + ")");
    }
}

bool FilterConfig::accepts(double mos) const {
    return inclusive ? (mos >= lo && mos <= hi) : (mos > lo && mos < hi);
}

Dataset filter_by_mos(const Dataset& ds, const MosKey& key, const FilterConfig& cfg) {
    cfg.validate();
    std::vector<ScoreRecord> kept;
    for (const auto& r : ds) {
        if (cfg.accepts(keyed_mos(r, key))) kept.push_back(r);
    }
    return Dataset(std::move(kept), ds.fad_dim(), ds.mos_dim());
}

BalanceReport balance_report(const Dataset& ds) {
    BalanceReport rep;
    rep.total = ds.size();
    for (const auto& r : ds) {
        switch (r.label) {
            case Label::bonafide: ++rep.n_bonafide; break;
            case Label::spoof: ++rep.n_spoof; break;
            case Label::unknown: ++rep.n_unknown; break;
        }
    }
    if (rep.n_bonafide > 0) {
        rep.ratio = static_cast<double>(rep.n_spoof) / static_cast<double>(rep.n_bonafide);
    }
    return rep;
}

nlohmann::json to_json(const BalanceReport& report) {
    nlohmann::json j;
    j["total"] = report.total;
    j["n_bonafide"] = report.n_bonafide;
    j["n_spoof"] = report.n_spoof;
    j["n_unknown"] = report.n_unknown;
    j["ratio_defined"] = report.ratio.has_value();
    j["ratio"] = report.ratio ? nlohmann::json(*report.ratio) : nlohmann::json(nullptr);
    return j;
}

MosHistogram mos_histogram(const Dataset& ds, const MosKey& key, double bin_width) {
    if (!(bin_width > 0.0)) {
        throw ValidationError("histogram bin width must be positive");
    }
    MosHistogram h;
    h.bin_width = bin_width;
    auto bins = static_cast<std::size_t>(std::ceil(5.0 / bin_width - 1e-9));
    bins = std::max<std::size_t>(bins, 1);
    for (std::size_t i = 0; i <= bins; ++i) h.edges.push_back(static_cast<double>(i) * bin_width);
    h.bonafide.assign(bins, 0);
    h.spoof.assign(bins, 0);
    h.unknown.assign(bins, 0);
    for (const auto& r : ds) {
        double v = keyed_mos(r, key);
        auto b = static_cast<std::size_t>(std::floor(v / bin_width));
        b = std::min(b, bins - 1);
        switch (r.label) {
            case Label::bonafide: ++h.bonafide[b]; break;
            case Label::spoof: ++h.spoof[b]; break;
            case Label::unknown: ++h.unknown[b]; break;
        }
    }
    return h;
}

nlohmann::json to_json(const MosHistogram& hist) {
    nlohmann::json j;
    j["bin_width"] = hist.bin_width;
    j["edges"] = hist.edges;
    j["bonafide"] = hist.bonafide;
    j["spoof"] = hist.spoof;
    j["unknown"] = hist.unknown;
    return j;
}

std::string histogram_csv(const MosHistogram& hist, Label label) {
    const auto& counts = label == Label::bonafide ? hist.bonafide
                         : label == Label::spoof  ? hist.spoof
                                                  : hist.unknown;
    std::string out = "bin_start,count\n";
    for (std::size_t i = 0; i < counts.size(); ++i) {
        out += format_double(hist.edges[i]) + "," + std::to_string(counts[i]) + "\n";
    }
    return out;
}

}  // namespace mosfad
