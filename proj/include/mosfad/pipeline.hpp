#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mosfad/fusion_models.hpp"
#include "mosfad/gbdt.hpp"
#include "mosfad/mos_filter.hpp"
#include "mosfad/synthgen.hpp"
#include "mosfad/training.hpp"

namespace mosfad {

// End-to-end synthetic benchmark: generate, optionally filter train/valid on
// fused MOS, train every fusion family, score the unfiltered eval split.
struct BenchmarkConfig {
    GenConfig gen;
    FilterConfig filter;
    // Per-sample updates: at lr 0.001 minibatches of 64 stop far from convergence
    // within the epoch cap.
    TrainConfig train = [] {
        TrainConfig t;
        t.batch_size = 1;
        return t;
    }();
    GbdtConfig gbdt;
    ThresholdConfig threshold;
    bool run_unfiltered = true;
    bool compute_oracle = true;
};

struct SystemResult {
    std::string name;  // e.g. "gated-mlp+thr"
    bool filtered = false;
    double eer = 0.0;
    std::size_t epochs = 0;  // training epochs or boosting rounds
};

struct BenchmarkResult {
    std::uint64_t seed = 0;
    double oracle_eer = 0.0;
    BalanceReport train_unfiltered;
    BalanceReport train_filtered;
    std::vector<SystemResult> systems;

    // Throws std::out_of_range when the system was not run.
    double eer(const std::string& name, bool filtered) const;
};

BenchmarkResult run_benchmark(const BenchmarkConfig& cfg, std::uint64_t seed);
nlohmann::json to_json(const BenchmarkResult& r);

}  // namespace mosfad
