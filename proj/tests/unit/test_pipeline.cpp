#include <cmath>
#include <filesystem>

#include "srcplan/baselines.hpp"
#include "srcplan/corpus.hpp"

#include <doctest.h>

#include "fixtures.hpp"
#include "srcplan/error.hpp"
#include "srcplan/pipeline.hpp"
#include "srcplan/report.hpp"

using namespace srcplan;
namespace fs = std::filesystem;

namespace {

RunContext small_run(const fs::path& dir) {
    auto cfg = Config::parse(
        "seed = 3\nsynth.n_docs = 40\nsynth.tokens_per_source = 20\npp.bootstrap = 50\n"
        "stm.sweeps = 20\nstm.burn_in = 5\nstm.chains = 2\naffinity.min_support = 2\n");
    cfg.set("run_dir", dir.string());
    return make_run_context(cfg);
}

std::map<std::string, std::string> csv_files(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.path().extension() == ".csv") out[fs::relative(e.path(), dir).string()] = read_text(e.path());
    return out;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("noise equalization writes noised labelings that later stages can use") {
    fixture::TempDir tmp("noise");
    auto cfg = Config::parse("seed = 4\nsynth.n_docs = 200\nnoise.accuracies = Planted:0.9, Decoy:0.7\n");
    cfg.set("run_dir", tmp.path.string());
    auto ctx = make_run_context(cfg);
    run_stage("synth", ctx);
    run_stage("baseline", ctx);
    REQUIRE(fs::exists(tmp.path / "labelings" / "noised_Planted.jsonl"));
    REQUIRE(fs::exists(tmp.path / "labelings" / "noised_Decoy.jsonl"));

    auto corpus = load_corpus(tmp.path / "corpus.jsonl");
    auto noised = load_labelings(tmp.path / "labelings" / "noised_Planted.jsonl");
    std::size_t n = 0, changed = 0;
    for (const auto& [doc, lab] : noised)
        for (const auto& [sid, l] : lab.assignments) {
            ++n;
            changed += l != corpus.labelings.at({doc, "Planted"}).assignments.at(sid);
        }
    // 800 sources; the swap share is binomial around p = 0.2 / (0.9 - 0.1 / 3).
    const double p = noise_probability(0.9, 0.7, 4);
    CHECK(n == 800);
    CHECK(std::abs(static_cast<double>(changed) / n - p) < 4 * std::sqrt(p * (1 - p) / n));
    // The least accurate labeler is the target, so its labels are untouched.
    auto decoy = load_labelings(tmp.path / "labelings" / "noised_Decoy.jsonl");
    for (const auto& [doc, lab] : decoy) CHECK(lab.assignments == corpus.labelings.at({doc, "Decoy"}).assignments);

    cfg.set("noise.apply", "true");
    auto applied = make_run_context(cfg);
    CHECK_NOTHROW(run_stage("train-lm", applied));
    fs::remove(tmp.path / "labelings" / "noised_Planted.jsonl");
    CHECK_THROWS_AS(run_stage("train-lm", applied), DataError);

    cfg.set("noise.accuracies", "Planted:1.5");
    CHECK_THROWS_AS(run_stage("baseline", make_run_context(cfg)), UsageError);
}

TEST_CASE("unknown config keys are usage errors") {
    auto cfg = Config::parse("lm.ordr = 2\n");
    CHECK_THROWS_AS(make_run_context(cfg), UsageError);
    CHECK_THROWS_AS(run_stage("nonsense", make_run_context(Config{})), UsageError);
}

TEST_CASE("stages report missing inputs as data errors") {
    fixture::TempDir tmp("missing");
    auto ctx = small_run(tmp.path);
    for (const char* stage : {"train-lm", "ppl", "select", "report"}) {
        try {
            run_stage(stage, ctx);
            FAIL("expected a data error from " << stage);
        } catch (const DataError& e) {
            CHECK(std::string(e.what()).find("first") != std::string::npos);
        }
    }
}

TEST_CASE("full pipeline writes its reports and reruns byte for byte") {
    fixture::TempDir tmp("pipeline");
    auto ctx = small_run(tmp.path);
    run_pipeline(ctx);
    for (const char* rel : {"corpus.jsonl", "registry.json", "config.txt", "ppl/summary.csv", "ppl/per_document.csv",
                            "posterior/summary.csv", "select/selection.csv", "select/shares.csv",
                            "cramers/matrix.csv", "cramers/heatmap.svg", "report/summary.csv", "report/summary.md"})
        CHECK_MESSAGE(fs::exists(tmp.path / rel), rel);

    auto first = csv_files(tmp.path);
    CHECK(first.size() >= 8);
    for (const auto& [name, text] : first) {
        CHECK_MESSAGE(text.find("# config_hash: " + ctx.config.hash()) != std::string::npos, name);
        CHECK_MESSAGE(text.find("# seed: 3") != std::string::npos, name);
    }
    auto summary = read_csv(tmp.path / "report/summary.csv");
    CHECK(summary.rows.size() == 2);

    run_pipeline(ctx);
    CHECK(csv_files(tmp.path) == first);
}

TEST_CASE("stm stage writes chains and a summary") {
    fixture::TempDir tmp("stm");
    auto cfg = Config::parse(
        "synth.mode = stm-story\nsynth.n_docs = 12\nsynth.background_tokens = 5\nstm.sweeps = 15\n"
        "stm.burn_in = 5\nstm.chains = 2\n");
    cfg.set("run_dir", tmp.path.string());
    auto ctx = make_run_context(cfg);
    run_stage("synth", ctx);
    run_stage("stm", ctx);
    CHECK(fs::exists(tmp.path / "stm/chain0.jsonl"));
    CHECK(fs::exists(tmp.path / "stm/chain1.jsonl"));
    auto t = read_csv(tmp.path / "stm/summary.csv");
    CHECK(t.rows.size() == 2);
}

}  // TEST_SUITE
