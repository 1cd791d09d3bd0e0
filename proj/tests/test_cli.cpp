#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mosfad/metrics.hpp"
#include "mosfad/score_data.hpp"
#include "mosfad/synthgen.hpp"
#include "test_util.hpp"

using namespace mosfad;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Runs the CLI with stdout and stderr captured in the scratch directory.
class Cli : public ::testing::Test {
protected:
    int run(const std::string& args) {
        const std::string cmd = std::string("\"") + MOSFAD_CLI_PATH + "\" " + args + " >\"" +
                                (dir / "stdout.txt").string() + "\" 2>\"" + (dir / "stderr.txt").string() + "\"";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }
    std::string out() const { return slurp(dir / "stdout.txt"); }
    std::string err() const { return slurp(dir / "stderr.txt"); }
    std::string p(const std::string& name) const { return "\"" + (dir / name).string() + "\""; }

    // Small corpus so every command finishes in well under a second.
    void make_corpus(const std::string& name, std::uint64_t seed = 42) {
        GenConfig cfg;
        cfg.n_train = 3000;
        cfg.n_valid = 1000;
        cfg.n_eval = 1000;
        std::ofstream(dir / "gen.json") << to_json(cfg).dump();
        ASSERT_EQ(run("gen --config " + p("gen.json") + " --out " + p(name) + " --seed " + std::to_string(seed)), 0)
            << err();
    }

    mosfad::testing::TempDir dir;
};

}  // namespace

TEST_F(Cli, HelpListsDefaultsAndExitsZero) {
    EXPECT_EQ(run("--help"), 0);
    EXPECT_EQ(run("train --help"), 0);
    const auto text = out();
    EXPECT_NE(text.find("0.001"), std::string::npos);
    EXPECT_NE(text.find("--patience"), std::string::npos);
    EXPECT_EQ(run("eval --help"), 0);
    EXPECT_NE(out().find("2.5"), std::string::npos);
}

TEST_F(Cli, UsageErrorsExitTwo) {
    EXPECT_EQ(run(""), 2);
    EXPECT_EQ(run("frobnicate"), 2);
    EXPECT_EQ(run("train --model mlp"), 2);
    EXPECT_EQ(run("report"), 2);
}

TEST_F(Cli, GenIsByteIdenticalAcrossRuns) {
    make_corpus("a");
    make_corpus("b");
    for (const char* f : {"train.jsonl", "valid.jsonl", "eval.jsonl", "manifest.json"}) {
        EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
    }
    const auto manifest = nlohmann::json::parse(slurp(dir / "a" / "manifest.json"));
    EXPECT_EQ(manifest.at("generator").at("seed"), 42);
    EXPECT_EQ(manifest.at("files").at("train").at("path"), "train.jsonl");
    EXPECT_EQ(load_records(dir / "a" / "train.jsonl").size(), 3000u);
}

TEST_F(Cli, GenRejectsMalformedConfig) {
    std::ofstream(dir / "bad.json") << "{\"n_train\": ";
    EXPECT_EQ(run("gen --config " + p("bad.json") + " --out " + p("x")), 2);
    std::ofstream(dir / "neg.json") << R"({"spoof_prior": 2.0})";
    EXPECT_EQ(run("gen --config " + p("neg.json") + " --out " + p("x")), 2);
}

TEST_F(Cli, FilterReportsRebalancingAndLeavesInputAlone) {
    make_corpus("c");
    const auto input = slurp(dir / "c" / "train.jsonl");
    ASSERT_EQ(run("filter --in " + p("c/train.jsonl") + " --out " + p("f.jsonl") + " --report " + p("rep.json")), 0)
        << err();
    EXPECT_EQ(slurp(dir / "c" / "train.jsonl"), input);
    const auto rep = nlohmann::json::parse(slurp(dir / "rep.json"));
    EXPECT_EQ(rep.at("before").at("total"), 3000);
    EXPECT_GT(rep.at("before").at("ratio").get<double>(), 5.0);
    EXPECT_LT(rep.at("after").at("ratio").get<double>(), 1.5);
    EXPECT_EQ(nlohmann::json::parse(out()), rep);
    for (const auto& r : load_records(dir / "f.jsonl")) {
        EXPECT_GE(*r.mos_fused, 3.0);
        EXPECT_LE(*r.mos_fused, 4.0);
    }
}

TEST_F(Cli, FilterFullRangeIsIdentity) {
    make_corpus("c");
    ASSERT_EQ(run("filter --in " + p("c/valid.jsonl") + " --out " + p("same.jsonl") + " --lo 0 --hi 5"), 0);
    EXPECT_EQ(slurp(dir / "same.jsonl"), slurp(dir / "c" / "valid.jsonl"));
}

TEST_F(Cli, FilterRejectsMissingKeyAndSelfOverwrite) {
    make_corpus("c");
    EXPECT_EQ(run("filter --in " + p("c/valid.jsonl") + " --out " + p("o.jsonl") + " --key 9"), 2);
    EXPECT_EQ(run("filter --in " + p("c/valid.jsonl") + " --out " + p("o.jsonl") + " --key nope"), 2);
    EXPECT_EQ(run("filter --in " + p("c/valid.jsonl") + " --out " + p("c/valid.jsonl")), 2);
    EXPECT_EQ(run("filter --in " + p("missing.jsonl") + " --out " + p("o.jsonl")), 2);
}

TEST_F(Cli, TrainWritesModelAndHistory) {
    make_corpus("c");
    ASSERT_EQ(run("train --model mlp --train " + p("c/train.jsonl") + " --valid " + p("c/valid.jsonl") +
                  " --out " + p("mlp.json") + " --max-epochs 5 --seed 1"),
              0)
        << err();
    EXPECT_TRUE(fs::exists(dir / "mlp.json"));
    const auto hist = slurp(dir / "mlp.history.csv");
    EXPECT_EQ(hist.rfind("epoch,train_loss,valid_loss\n", 0), 0u);
    EXPECT_EQ(std::count(hist.begin(), hist.end(), '\n'), 6);

    ASSERT_EQ(run("train --model gbdt --train " + p("c/train.jsonl") + " --valid " + p("c/valid.jsonl") +
                  " --out " + p("gbdt.json") + " --num-rounds 5"),
              0)
        << err();
    EXPECT_EQ(slurp(dir / "gbdt.history.csv").rfind("round,train_logloss,valid_auc\n", 0), 0u);
}

TEST_F(Cli, ZeroLearningRateGivesFlatHistory) {
    make_corpus("c");
    ASSERT_EQ(run("train --model gated-mlp --train " + p("c/train.jsonl") + " --valid " + p("c/valid.jsonl") +
                  " --out " + p("g.json") + " --lr 0 --patience 3 --history " + p("h.csv")),
              0)
        << err();
    std::istringstream lines(slurp(dir / "h.csv"));
    std::string line, first_valid;
    std::getline(lines, line);
    int n = 0;
    while (std::getline(lines, line)) {
        const auto valid = line.substr(line.rfind(',') + 1);
        if (n++ == 0) first_valid = valid;
        EXPECT_EQ(valid, first_valid);
    }
    EXPECT_EQ(n, 4);
}

TEST_F(Cli, SingleClassTrainingExitsTwo) {
    make_corpus("c");
    // Fused MOS above 4.5 is essentially all bonafide; force it with a bonafide-only file.
    auto ds = load_records(dir / "c" / "train.jsonl");
    std::vector<ScoreRecord> bona;
    for (const auto& r : ds) {
        if (r.label == Label::bonafide) bona.push_back(r);
    }
    save_records(Dataset(bona, ds.fad_dim(), ds.mos_dim()), dir / "bona.jsonl");
    EXPECT_EQ(run("train --model mlp --train " + p("bona.jsonl") + " --valid " + p("c/valid.jsonl") + " --out " +
                  p("m.json")),
              2);
    EXPECT_EQ(run("train --model gbdt --train " + p("bona.jsonl") + " --valid " + p("c/valid.jsonl") + " --out " +
                  p("m.json")),
              2);
}

TEST_F(Cli, ThresholdedEvalAndSelfComparison) {
    make_corpus("c");
    ASSERT_EQ(run("train --model gated-mlp --train " + p("c/train.jsonl") + " --valid " + p("c/valid.jsonl") +
                  " --out " + p("g.json") + " --max-epochs 3"),
              0);
    ASSERT_EQ(run("eval --model " + p("g.json") + " --data " + p("c/eval.jsonl") + " --out-dir " + p("plain")), 0)
        << err();
    ASSERT_EQ(run("eval --model " + p("g.json") + " --data " + p("c/eval.jsonl") + " --out-dir " + p("thr") +
                  " --threshold --det --compare " + p("g.json") + " --bootstrap 200 --seed 3"),
              0)
        << err();
    const auto eval = load_records(dir / "c" / "eval.jsonl");
    std::istringstream plain(slurp(dir / "plain" / "scores.csv")), thr(slurp(dir / "thr" / "scores.csv"));
    std::string a, b;
    std::getline(plain, a);
    std::getline(thr, b);
    EXPECT_EQ(b, "utt_id,score");
    for (const auto& r : eval) {
        ASSERT_TRUE(std::getline(plain, a) && std::getline(thr, b));
        const auto sa = a.substr(a.find(',') + 1), sb = b.substr(b.find(',') + 1);
        EXPECT_EQ(b.substr(0, b.find(',')), r.utt_id);
        if (*r.mos_fused < 2.5) EXPECT_EQ(sb, "0");
        else if (*r.mos_fused > 4.0) EXPECT_EQ(sb, "1");
        else EXPECT_EQ(sb, sa);
    }
    const auto rep = nlohmann::json::parse(slurp(dir / "thr" / "report.json"));
    EXPECT_GE(rep.at("significance").at("p_value").get<double>(), 0.5);
    EXPECT_EQ(rep.at("threshold").at("m1"), 2.5);
    EXPECT_TRUE(fs::exists(dir / "thr" / "det.csv"));
    EXPECT_FALSE(fs::exists(dir / "plain" / "det.csv"));
}

TEST_F(Cli, EvalDimensionMismatchExitsTwo) {
    make_corpus("c");
    ASSERT_EQ(run("train --model mlp --train " + p("c/train.jsonl") + " --valid " + p("c/valid.jsonl") +
                  " --out " + p("m.json") + " --max-epochs 2"),
              0);
    auto ds = load_records(dir / "c" / "eval.jsonl");
    std::vector<ScoreRecord> narrow;
    for (auto r : ds) {
        r.fad.pop_back();
        narrow.push_back(r);
    }
    save_records(Dataset(narrow, 6, ds.mos_dim()), dir / "narrow.jsonl");
    EXPECT_EQ(run("eval --model " + p("m.json") + " --data " + p("narrow.jsonl") + " --out-dir " + p("e")), 2);
    EXPECT_EQ(run("eval --model " + p("m.json") + " --data " + p("c/eval.jsonl") + " --out-dir " + p("e") +
                  " --threshold --m1 4 --m2 3"),
              2);
}

TEST_F(Cli, ReportComputesRelativeReduction) {
    EvalReport base{0.1564, 0.5, 0.9, 100, 900};
    EvalReport ours{0.1351, 0.5, 0.92, 100, 900};
    std::ofstream(dir / "sota.json") << nlohmann::json{{"eval", to_json(base)}}.dump();
    std::ofstream(dir / "gated.json") << nlohmann::json{{"eval", to_json(ours)}}.dump();
    const std::string args = "report " + p("sota.json") + " " + p("gated.json") + " --names sota,gated --markdown " +
                             p("t.md") + " --json " + p("s.json");
    ASSERT_EQ(run(args), 0) << err();
    const auto md = slurp(dir / "t.md");
    EXPECT_NE(md.find("| gated | 13.51 | 13.6 |"), std::string::npos) << md;
    EXPECT_NE(md.find("| sota | 15.64 | - |"), std::string::npos) << md;
    const auto summary = nlohmann::json::parse(slurp(dir / "s.json"));
    EXPECT_NEAR(summary.at("systems").at(1).at("relative_reduction").get<double>(), 0.136, 5e-4);
    EXPECT_EQ(out(), md);
    ASSERT_EQ(run(args), 0);
    EXPECT_EQ(slurp(dir / "t.md"), md);

    EXPECT_EQ(run("report " + p("sota.json") + " " + p("gated.json") + " --names only-one"), 2);
    EXPECT_EQ(run("report " + p("absent.json")), 2);
}
