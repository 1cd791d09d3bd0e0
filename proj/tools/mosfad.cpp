// mosfad command-line driver: gen, filter, train, eval, report.
//
// Exit codes: 0 success, 2 usage or validation error, 1 runtime failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mosfad/error.hpp"
#include "mosfad/features.hpp"
#include "mosfad/io_util.hpp"
#include "mosfad/metrics.hpp"
#include "mosfad/model.hpp"
#include "mosfad/mos_filter.hpp"
#include "mosfad/score_data.hpp"
#include "mosfad/synthgen.hpp"
#include "mosfad/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mosfad;

namespace {

void print_json(const json& j) { std::cout << j.dump(2) << "\n"; }

void write_json(const fs::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

void ensure_distinct(const fs::path& in, const fs::path& out) {
    std::error_code ec;
    if (fs::exists(out) && fs::equivalent(in, out, ec)) {
        throw ValidationError("output " + out.string() + " would overwrite input");
    }
}

Dataset load_input(const fs::path& path) {
    if (!fs::exists(path)) throw ValidationError("no such file: " + path.string());
    return load_records(path);
}

// ---------------------------------------------------------------- gen

struct GenArgs {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::string format = "jsonl";
};

int cmd_gen(const GenArgs& a) {
    GenConfig cfg = a.config.empty() ? GenConfig{} : load_gen_config(a.config);
    if (a.seed) cfg.seed = *a.seed;
    cfg.validate();
    const FileFormat format = parse_format(a.format);
    const std::string ext = format == FileFormat::csv ? ".csv" : ".jsonl";

    fs::create_directories(a.out);
    const Corpus corpus = generate(cfg);
    json files = json::object();
    for (const auto& [name, ds] : {std::pair<const char*, const Dataset*>{"train", &corpus.train},
                                   {"valid", &corpus.valid},
                                   {"eval", &corpus.eval}}) {
        const std::string file = std::string(name) + ext;
        save_records(*ds, fs::path(a.out) / file, format);
        files[name] = {{"path", file}, {"records", ds->size()}, {"balance", to_json(balance_report(*ds))}};
    }
    const json manifest = {{"generator", to_json(cfg)}, {"seed", cfg.seed}, {"files", files}};
    write_json(fs::path(a.out) / "manifest.json", manifest);
    print_json(manifest);
    return 0;
}

// ---------------------------------------------------------------- filter

struct FilterArgs {
    std::string in;
    std::string out;
    double lo = 3.0;
    double hi = 4.0;
    std::string key = "fused";
    bool exclusive = false;
    std::string report;
};

int cmd_filter(const FilterArgs& a) {
    FilterConfig cfg{a.lo, a.hi, !a.exclusive};
    cfg.validate();
    const MosKey key = parse_key(a.key);
    const Dataset ds = load_input(a.in);
    ensure_distinct(a.in, a.out);
    const Dataset kept = filter_by_mos(ds, key, cfg);
    save_records(kept, a.out);
    const json report = {
        {"filter", {{"lo", cfg.lo}, {"hi", cfg.hi}, {"inclusive", cfg.inclusive}, {"key", key.describe()}}},
        {"before", to_json(balance_report(ds))},
        {"after", to_json(balance_report(kept))}};
    if (!a.report.empty()) write_json(a.report, report);
    print_json(report);
    return 0;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
    std::string model = "mlp";
    std::string train;
    std::string valid;
    std::string out;
    std::string history;
    std::string features;
    std::string gate_input = "fused";
    std::size_t hidden = 3;
    bool embedding = false;
    bool quantize_targets = false;
    double quantize_step = 0.125;
    TrainConfig tc;
    bool no_shuffle = false;
    GbdtConfig gbdt;
};

fs::path default_history_path(const fs::path& model_path) {
    fs::path p = model_path;
    p.replace_extension(".history.csv");
    return p;
}

std::string gbdt_history_csv(const GbdtTrainResult& r) {
    std::string out = "round,train_logloss,valid_auc\n";
    for (const auto& h : r.history) {
        out += std::to_string(h.round) + "," + format_double(h.train_logloss) + "," +
               format_double(h.valid_auc) + "\n";
    }
    return out;
}

int cmd_train(TrainArgs a) {
    const Dataset train = load_input(a.train);
    const Dataset valid = load_input(a.valid);
    ensure_distinct(a.train, a.out);
    ensure_distinct(a.valid, a.out);
    const fs::path history = a.history.empty() ? default_history_path(a.out) : fs::path(a.history);
    a.tc.shuffle = !a.no_shuffle;

    json summary = {{"model", a.out}, {"history", history.string()}};
    if (a.model == "gbdt") {
        const FeatureSet features = parse_feature_set(a.features.empty() ? "fad-mos" : a.features);
        auto out = train_gbdt_model(train, valid, features, a.gbdt);
        save_model(out.model, a.out);
        write_file(history, gbdt_history_csv(out.result));
        summary["model_type"] = "gbdt";
        summary["rounds"] = out.result.history.size();
        summary["best_round"] = out.result.best_round;
        summary["trees"] = std::get<GbdtModel>(out.model.base).ensemble.trees.size();
        print_json(summary);
        return 0;
    }

    ModelSpec spec;
    if (a.model == "mlp") {
        spec.kind = ModelKind::mlp;
        spec.features = parse_feature_set(a.features.empty() ? "fad" : a.features);
    } else if (a.model == "gated-mlp") {
        spec.kind = ModelKind::gated_mlp;
        spec.gate_input = parse_gate_input(a.gate_input);
    } else if (a.model == "mos-fuser") {
        spec.kind = ModelKind::mos_fuser;
        spec.quantize_targets = a.quantize_targets;
        spec.quantize_step = a.quantize_step;
    } else {
        throw ValidationError("unknown model '" + a.model + "'");
    }
    spec.hidden_dim = a.hidden;
    spec.embedding_mode = a.embedding;
    if (spec.hidden_dim < 1) throw ValidationError("hidden dimension must be >= 1");

    auto res = train_model(spec, train, valid, a.tc);
    save_model(res.model, a.out);
    write_file(history, history_csv(res.history));
    summary["model_type"] = std::string(model_type(res.model));
    summary["training"] = to_json(res.history);
    print_json(summary);
    return 0;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
    std::string model;
    std::string data;
    std::string out_dir;
    bool threshold = false;
    double m1 = 2.5;
    double m2 = 4.0;
    bool det = false;
    std::string compare;
    std::size_t bootstrap = 1000;
    double alpha = 0.01;
    std::uint64_t seed = 0;
};

FusionModel load_for_eval(const std::string& path, const EvalArgs& a) {
    if (!fs::exists(path)) throw ValidationError("no such model file: " + path);
    FusionModel m = load_model(path);
    if (a.threshold) m = with_threshold(std::move(m), ThresholdConfig{a.m1, a.m2});
    return m;
}

int cmd_eval(const EvalArgs& a) {
    if (a.threshold) ThresholdConfig{a.m1, a.m2}.validate();
    const FusionModel model = load_for_eval(a.model, a);
    const Dataset data = load_input(a.data);
    const auto scores = predict_batch(model, data);

    std::string scores_csv = "utt_id,score\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
        scores_csv += data[i].utt_id + "," + format_double(scores[i]) + "\n";
    }

    std::vector<double> labeled_scores;
    std::vector<Label> labels;
    std::vector<std::size_t> labeled_idx;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (data[i].label == Label::unknown) continue;
        labeled_scores.push_back(scores[i]);
        labels.push_back(data[i].label);
        labeled_idx.push_back(i);
    }

    json report = {{"model", a.model},
                   {"model_type", std::string(model_type(model))},
                   {"data", a.data},
                   {"n_records", data.size()},
                   {"threshold", a.threshold ? json{{"m1", a.m1}, {"m2", a.m2}} : json(nullptr)},
                   {"eval", to_json(evaluate(labeled_scores, labels))}};

    if (!a.compare.empty()) {
        const FusionModel other = load_for_eval(a.compare, a);
        const auto other_scores = predict_batch(other, data);
        std::vector<double> other_labeled;
        other_labeled.reserve(labeled_idx.size());
        for (std::size_t i : labeled_idx) other_labeled.push_back(other_scores[i]);
        report["compare"] = a.compare;
        report["significance"] =
            to_json(bootstrap_significance(labeled_scores, other_labeled, labels, a.bootstrap, a.seed, a.alpha));
    }

    const fs::path dir = a.out_dir;
    fs::create_directories(dir);
    write_file(dir / "scores.csv", scores_csv);
    if (a.det) write_file(dir / "det.csv", det_csv(det_curve(labeled_scores, labels)));
    write_json(dir / "report.json", report);
    print_json(report);
    return 0;
}

// ---------------------------------------------------------------- report

struct ReportArgs {
    std::vector<std::string> inputs;
    std::string names_csv;
    std::string markdown;
    std::string json_out;
};

std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

int cmd_report(const ReportArgs& a) {
    if (a.inputs.empty()) throw ValidationError("report needs at least one input file");
    std::vector<std::string> names;
    if (!a.names_csv.empty()) {
        for (auto part : split_view(a.names_csv, ',')) names.emplace_back(part);
    }
    if (!names.empty() && names.size() != a.inputs.size()) {
        throw ValidationError("--names must match the number of inputs");
    }
    struct Row {
        std::string name;
        std::string file;
        EvalReport report;
    };
    std::vector<Row> rows;
    for (std::size_t i = 0; i < a.inputs.size(); ++i) {
        const fs::path p = a.inputs[i];
        if (!fs::exists(p)) throw ValidationError("no such file: " + p.string());
        json j;
        try {
            j = json::parse(read_file(p));
        } catch (const json::parse_error& e) {
            throw ValidationError(p.string() + ": malformed JSON: " + e.what());
        }
        const json& body = j.contains("eval") ? j.at("eval") : j;
        std::string name = names.empty() ? p.stem().string() : names[i];
        if (names.empty() && p.stem() == "report" && p.has_parent_path()) {
            name = p.parent_path().filename().string();
        }
        rows.push_back({name, p.string(), eval_report_from_json(body)});
    }

    const Row& ref = rows.front();
    std::string md = "| System | EER (%) | Rel. reduction vs " + ref.name + " (%) |\n";
    md += "|---|---:|---:|\n";
    json systems = json::array();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        json entry = {{"name", r.name}, {"file", r.file}, {"eer", r.report.eer}, {"auc", r.report.auc}};
        std::string rel = "-";
        if (i == 0) {
            entry["relative_reduction"] = nullptr;
        } else {
            const double rr = relative_reduction(r.report.eer, ref.report.eer);
            entry["relative_reduction"] = rr;
            rel = fixed(100.0 * rr, 1);
        }
        md += "| " + r.name + " | " + fixed(100.0 * r.report.eer, 2) + " | " + rel + " |\n";
        systems.push_back(entry);
    }
    const json summary = {{"reference", ref.name}, {"systems", systems}};
    if (!a.markdown.empty()) write_file(a.markdown, md);
    if (!a.json_out.empty()) write_json(a.json_out, summary);
    std::cout << md;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Score fusion and MOS-based filtering for fake audio detection"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);

    GenArgs gen;
    auto* g = app.add_subcommand("gen", "Generate a synthetic train/valid/eval corpus");
    g->add_option("--config", gen.config, "Generator config JSON (built-in defaults if omitted)");
    g->add_option("--out", gen.out, "Output directory")->required();
    g->add_option("--seed", gen.seed, "Override the config seed");
    g->add_option("--format", gen.format, "jsonl or csv");

    FilterArgs filt;
    auto* f = app.add_subcommand("filter", "Keep records whose MOS lies in [lo, hi]");
    f->add_option("--in", filt.in, "Input score file")->required();
    f->add_option("--out", filt.out, "Output score file")->required();
    f->add_option("--lo", filt.lo, "Lower MOS bound");
    f->add_option("--hi", filt.hi, "Upper MOS bound");
    f->add_option("--key", filt.key, "fused, or a component index K");
    f->add_flag("--exclusive", filt.exclusive, "Use open bounds");
    f->add_option("--report", filt.report, "Write the balance report JSON here");

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Train a fusion model");
    t->add_option("--model", tr.model, "mlp, gated-mlp, gbdt or mos-fuser")
        ->check(CLI::IsMember({"mlp", "gated-mlp", "gbdt", "mos-fuser"}));
    t->add_option("--train", tr.train, "Training score file")->required();
    t->add_option("--valid", tr.valid, "Validation score file")->required();
    t->add_option("--out", tr.out, "Model JSON output")->required();
    t->add_option("--history", tr.history, "History CSV (default: the model path with extension .history.csv)");
    t->add_option("--features", tr.features, "fad, fad-mos or fad-mosvec (mlp: fad, gbdt: fad-mos)");
    t->add_option("--gate-input", tr.gate_input, "Gate input for gated-mlp: fused or mos");
    t->add_option("--hidden", tr.hidden, "Hidden units");
    t->add_flag("--embedding", tr.embedding, "Hidden width = input dimension / 2");
    t->add_flag("--quantize-targets", tr.quantize_targets, "mos-fuser: snap targets to the MOS grid");
    t->add_option("--quantize-step", tr.quantize_step, "mos-fuser: grid step");
    t->add_option("--lr", tr.tc.learning_rate, "SGD learning rate");
    t->add_option("--batch-size", tr.tc.batch_size, "Minibatch size");
    t->add_option("--max-epochs", tr.tc.max_epochs, "Epoch cap");
    t->add_option("--patience", tr.tc.patience, "Epochs without a new validation minimum before stopping");
    t->add_option("--seed", tr.tc.seed, "Initialisation and shuffling seed");
    t->add_flag("--no-shuffle", tr.no_shuffle, "Keep file order in every epoch");
    t->add_option("--num-leaves", tr.gbdt.num_leaves, "gbdt: max leaves per tree");
    t->add_option("--max-bin", tr.gbdt.max_bin, "gbdt: histogram bins per feature");
    t->add_option("--max-depth", tr.gbdt.max_depth, "gbdt: max tree depth");
    t->add_option("--gbdt-lr", tr.gbdt.learning_rate, "gbdt: shrinkage");
    t->add_option("--num-rounds", tr.gbdt.num_rounds, "gbdt: boosting rounds");
    t->add_option("--early-stopping", tr.gbdt.early_stopping_patience, "gbdt: rounds without AUC gain");
    t->add_option("--min-data-in-leaf", tr.gbdt.min_data_in_leaf, "gbdt: minimum records per leaf");
    t->add_option("--lambda-l2", tr.gbdt.lambda_l2, "gbdt: L2 leaf regularisation");

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "Score a dataset and compute EER/AUC");
    e->add_option("--model", ev.model, "Model JSON")->required();
    e->add_option("--data", ev.data, "Score file")->required();
    e->add_option("--out-dir", ev.out_dir, "Directory for scores.csv, report.json and det.csv")->required();
    e->add_flag("--threshold", ev.threshold, "Apply MOS thresholding");
    e->add_option("--m1", ev.m1, "MOS below m1 scores 0");
    e->add_option("--m2", ev.m2, "MOS above m2 scores 1");
    e->add_flag("--det", ev.det, "Also write det.csv");
    e->add_option("--compare", ev.compare, "Second model for a paired bootstrap test");
    e->add_option("--bootstrap", ev.bootstrap, "Bootstrap replicates");
    e->add_option("--alpha", ev.alpha, "Significance level");
    e->add_option("--seed", ev.seed, "Bootstrap seed");

    ReportArgs rep;
    auto* r = app.add_subcommand("report", "Tabulate EERs with reductions relative to the first input");
    r->add_option("inputs", rep.inputs, "Report JSON files (first is the reference)");
    r->add_option("--names", rep.names_csv, "Comma-separated row names, one per input");
    r->add_option("--markdown", rep.markdown, "Write the markdown table here");
    r->add_option("--json", rep.json_out, "Write the JSON summary here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*g) return cmd_gen(gen);
        if (*f) return cmd_filter(filt);
        if (*t) return cmd_train(tr);
        if (*e) return cmd_eval(ev);
        if (*r) return cmd_report(rep);
    } catch (const ValidationError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    } catch (const nlohmann::json::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
    return 2;
}
