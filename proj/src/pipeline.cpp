#include "mosfad/pipeline.hpp"

#include <stdexcept>

#include "mosfad/features.hpp"
#include "mosfad/metrics.hpp"
#include "mosfad/model.hpp"

namespace mosfad {

double BenchmarkResult::eer(const std::string& name, bool filtered) const {
    for (const auto& s : systems) {
        if (s.name == name && s.filtered == filtered) return s.eer;
    }
    throw std::out_of_range("no benchmark system " + name + (filtered ? " (filtered)" : ""));
}

namespace {

void score_system(BenchmarkResult& out, const std::string& name, bool filtered,
                  const FusionModel& model, const ThresholdConfig& thr, const Dataset& eval,
                  const std::vector<Label>& labels, std::size_t epochs) {
    out.systems.push_back(
        {name, filtered, compute_eer(predict_batch(model, eval), labels).eer, epochs});
    const auto gated = with_threshold(model, thr);
    out.systems.push_back(
        {name + "+thr", filtered, compute_eer(predict_batch(gated, eval), labels).eer, epochs});
}

void run_family(BenchmarkResult& out, const BenchmarkConfig& cfg, const Dataset& train,
                const Dataset& valid, const Dataset& eval, const std::vector<Label>& labels,
                bool filtered, std::uint64_t seed) {
    TrainConfig tc = cfg.train;
    tc.seed = seed;

    ModelSpec mlp;
    mlp.kind = ModelKind::mlp;
    mlp.features = FeatureSet::fad;
    auto r = train_model(mlp, train, valid, tc);
    score_system(out, "mlp", filtered, r.model, cfg.threshold, eval, labels, r.history.stopped_epoch);

    ModelSpec gated;
    gated.kind = ModelKind::gated_mlp;
    gated.gate_input = GateInput::fused;
    r = train_model(gated, train, valid, tc);
    score_system(out, "gated-mlp", filtered, r.model, cfg.threshold, eval, labels,
                 r.history.stopped_epoch);

    auto g = train_gbdt_model(train, valid, FeatureSet::fad_fused, cfg.gbdt);
    score_system(out, "gbdt", filtered, g.model, cfg.threshold, eval, labels,
                 g.result.history.size());
}

}  // namespace

BenchmarkResult run_benchmark(const BenchmarkConfig& cfg, std::uint64_t seed) {
    GenConfig gen = cfg.gen;
    gen.seed = seed;
    const Corpus corpus = generate(gen);
    const MosKey key = MosKey::fused();
    const Dataset train_f = filter_by_mos(corpus.train, key, cfg.filter);
    const Dataset valid_f = filter_by_mos(corpus.valid, key, cfg.filter);
    const auto labels = labels_of(corpus.eval);

    BenchmarkResult out;
    out.seed = seed;
    out.train_unfiltered = balance_report(corpus.train);
    out.train_filtered = balance_report(train_f);
    if (cfg.compute_oracle) out.oracle_eer = oracle_eer(gen, corpus.eval);
    run_family(out, cfg, train_f, valid_f, corpus.eval, labels, true, seed);
    if (cfg.run_unfiltered) {
        run_family(out, cfg, corpus.train, corpus.valid, corpus.eval, labels, false, seed);
    }
    return out;
}

nlohmann::json to_json(const BenchmarkResult& r) {
    nlohmann::json systems = nlohmann::json::array();
    for (const auto& s : r.systems) {
        systems.push_back(
            {{"name", s.name}, {"filtered", s.filtered}, {"eer", s.eer}, {"epochs", s.epochs}});
    }
    return {{"seed", r.seed},
            {"oracle_eer", r.oracle_eer},
            {"train_unfiltered", to_json(r.train_unfiltered)},
            {"train_filtered", to_json(r.train_filtered)},
            {"systems", systems}};
}

}  // namespace mosfad
