#include <cmath>
#include <fstream>
#include <numeric>

#include <doctest.h>

#include "../oracles/stm_enumerate.hpp"
#include "fixtures.hpp"
#include "srcplan/error.hpp"
#include "srcplan/stm.hpp"
#include "srcplan/synth.hpp"

using namespace srcplan;

namespace {

// Doc A: a source says "x", the background says "y". Doc B: background "x".
Corpus toy_corpus() {
    Corpus c;
    c.documents.push_back(fixture::make_doc("A", {"x", "y"}, {{0}}));
    c.documents.push_back(fixture::make_doc("B", {"x"}, {}));
    c.split["A"] = c.split["B"] = Split::train;
    return c;
}

std::vector<oracle::ToyDoc> toy_docs() {
    return {{1, {0, 1}, {0, -1}}, {0, {0}, {-1}}};
}

StmConfig toy_config() {
    StmConfig cfg;
    cfg.n_doc_types = cfg.n_source_types = cfg.n_topics = 2;
    cfg.h_T = 0.7;
    cfg.h_S = 1.3;
    cfg.h_z = 0.6;
    cfg.h_w = 0.4;
    cfg.sweeps = 10;
    cfg.burn_in = 1;
    return cfg;
}

oracle::ToyModel toy_model(const StmConfig& c) {
    return {c.n_doc_types, c.n_source_types, c.n_topics, 2, c.h_T, c.h_S, c.h_z, c.h_w};
}

std::vector<double> normalize_log(std::vector<double> lw) {
    const double mx = *std::max_element(lw.begin(), lw.end());
    double z = 0;
    for (auto& x : lw) z += (x = std::exp(x - mx));
    for (auto& x : lw) x /= z;
    return lw;
}

GibbsState state_at(const GibbsState& base, const oracle::ToyAssignment& a) {
    GibbsState s = base;
    s.set_assignments(a.doc_types, a.source_types, a.topics);
    return s;
}

SynthResult story(std::uint64_t seed, std::size_t docs = 12) {
    SynthSpec spec;
    spec.mode = SynthMode::stm_story;
    spec.n_docs = docs;
    spec.sources_per_doc = 3;
    spec.tokens_per_source = 8;
    spec.background_tokens = 6;
    spec.seed = seed;
    return generate_corpus(spec);
}

}  // namespace

TEST_SUITE("stm") {

TEST_CASE("config validation") {
    StmConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.n_topics = 0;
    CHECK_THROWS_AS(cfg.validate(), UsageError);
    cfg = {};
    cfg.h_w = 0.0;
    CHECK_THROWS_AS(cfg.validate(), UsageError);
    cfg = {};
    cfg.burn_in = cfg.sweeps;
    CHECK_THROWS_AS(cfg.validate(), UsageError);
    cfg.sweeps = cfg.burn_in = 0;
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("switch mask follows attribution") {
    auto c = toy_corpus();
    auto mask = build_switch_mask(c);
    REQUIRE(mask.docs.size() == 2);
    CHECK(mask.docs[0].owner == std::vector<int>{0, SwitchMask::kBackground});
    CHECK(mask.docs[1].owner == std::vector<int>{SwitchMask::kBackground});
    mask.docs[0].owner[1] = 0;
    CHECK_THROWS_AS(GibbsState::init(c, mask, toy_config()), DataError);
}

TEST_CASE("empty corpus gives an empty state") {
    Corpus empty;
    auto st = GibbsState::init(empty, build_switch_mask(empty), StmConfig{});
    CHECK(st.n_docs() == 0);
    CHECK(st.log_joint() == 0.0);
    CHECK_NOTHROW(st.audit());
    for (auto x : st.c_T()) CHECK(x == 0);
}

TEST_CASE("init is seeded and passes the audit") {
    auto s = story(3);
    auto mask = build_switch_mask(s.corpus);
    StmConfig cfg;
    cfg.seed = 12;
    auto a = GibbsState::init(s.corpus, mask, cfg);
    auto b = GibbsState::init(s.corpus, mask, cfg);
    CHECK(a.doc_types() == b.doc_types());
    CHECK(a.word_topics() == b.word_topics());
    CHECK_NOTHROW(a.audit());
    CHECK(std::accumulate(a.c_T().begin(), a.c_T().end(), std::int64_t{0}) == 12);
    std::int64_t tokens = 0, zw = 0;
    for (std::size_t d = 0; d < a.n_docs(); ++d) tokens += static_cast<std::int64_t>(a.n_tokens(d));
    for (std::size_t k = 0; k < a.c_zw().rows(); ++k)
        for (std::size_t w = 0; w < a.c_zw().cols(); ++w) zw += a.c_zw()(k, w);
    CHECK(zw == tokens);
}

TEST_CASE("audit holds after every single update") {
    auto s = story(4, 6);
    StmConfig cfg;
    cfg.seed = 2;
    auto st = GibbsState::init(s.corpus, build_switch_mask(s.corpus), cfg);
    for (int rep = 0; rep < 3; ++rep) {
        for (std::size_t d = 0; d < st.n_docs(); ++d) {
            st.sample_doc_type(d);
            CHECK_NOTHROW(st.audit());
            for (std::size_t q = 0; q < st.n_sources(d); ++q) {
                st.sample_source_type(d, q);
                CHECK_NOTHROW(st.audit());
            }
            for (std::size_t i = 0; i < st.n_tokens(d); ++i) st.sample_word_topic(d, i);
            CHECK_NOTHROW(st.audit());
        }
    }
}

TEST_CASE("log joint equals the urn-product oracle on every toy state") {
    auto c = toy_corpus();
    auto cfg = toy_config();
    auto base = GibbsState::init(c, build_switch_mask(c), cfg);
    auto states = oracle::enumerate_assignments(toy_docs(), toy_model(cfg));
    REQUIRE(states.size() == 64);
    for (const auto& a : states)
        CHECK(std::abs(state_at(base, a).log_joint() - oracle::toy_log_joint(toy_docs(), a, toy_model(cfg))) <= 1e-9);
}

TEST_CASE("conditionals equal enumerated conditionals on the toy") {
    auto c = toy_corpus();
    auto cfg = toy_config();
    auto base = GibbsState::init(c, build_switch_mask(c), cfg);
    const auto docs = toy_docs();
    const auto model = toy_model(cfg);
    for (const auto& a : oracle::enumerate_assignments(docs, model)) {
        auto st = state_at(base, a);
        auto check = [&](std::vector<double> lib, auto mutate, std::size_t n) {
            std::vector<double> lw;
            for (std::size_t v = 0; v < n; ++v) {
                auto b = a;
                mutate(b, v);
                lw.push_back(oracle::toy_log_joint(docs, b, model));
            }
            auto want = normalize_log(lw);
            auto got = normalize_log(lib);
            for (std::size_t v = 0; v < n; ++v) CHECK(std::abs(got[v] - want[v]) <= 1e-12);
            // Unnormalized weights differ from the joint by one constant.
            for (std::size_t v = 1; v < n; ++v) CHECK(std::abs((lib[v] - lib[0]) - (lw[v] - lw[0])) <= 1e-12);
        };
        for (std::size_t d = 0; d < 2; ++d)
            check(st.doc_type_log_weights(d), [d](oracle::ToyAssignment& b, std::size_t v) { b.doc_types[d] = v; }, 2);
        check(st.source_type_log_weights(0, 0),
              [](oracle::ToyAssignment& b, std::size_t v) { b.source_types[0][0] = v; }, 2);
        for (std::size_t d = 0; d < 2; ++d)
            for (std::size_t i = 0; i < docs[d].words.size(); ++i)
                check(st.word_topic_log_weights(d, i),
                      [d, i](oracle::ToyAssignment& b, std::size_t v) { b.topics[d][i] = v; }, 2);
    }
}

TEST_CASE("conditional weights are finite and positive") {
    auto s = story(5, 5);
    StmConfig cfg;
    auto st = GibbsState::init(s.corpus, build_switch_mask(s.corpus), cfg);
    for (std::size_t d = 0; d < st.n_docs(); ++d) {
        for (double w : st.doc_type_log_weights(d)) CHECK(std::isfinite(w));
        for (std::size_t i = 0; i < st.n_tokens(d); ++i)
            for (double w : st.word_topic_log_weights(d, i)) CHECK(std::isfinite(w));
    }
}

TEST_CASE("empty document has a uniform doc-type conditional") {
    Corpus c;
    c.documents.push_back(fixture::make_doc("lonely", {}, {}));
    c.split["lonely"] = Split::train;
    StmConfig cfg;
    cfg.n_doc_types = 3;
    auto st = GibbsState::init(c, build_switch_mask(c), cfg);
    for (double p : normalize_log(st.doc_type_log_weights(0))) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("wordless source follows the source-type prior") {
    Corpus c;
    c.documents.push_back(fixture::make_doc("d", {"   ", "a"}, {{0}, {1}}));
    c.split["d"] = Split::train;
    StmConfig cfg;
    cfg.n_doc_types = 1;
    cfg.n_source_types = 2;
    cfg.n_topics = 2;
    cfg.h_S = 0.5;
    auto st = GibbsState::init(c, build_switch_mask(c), cfg);
    st.set_assignments({0}, {{0, 1}}, {{1}});
    auto p = normalize_log(st.source_type_log_weights(0, 0));
    CHECK(p[0] == doctest::Approx(0.5 / 2.0).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(1.5 / 2.0).epsilon(1e-12));
}

TEST_CASE("single-word vocabulary reduces topics to prevalence") {
    Corpus c;
    c.documents.push_back(fixture::make_doc("d", {"a a a", "a a"}, {{0}}));
    c.split["d"] = Split::train;
    StmConfig cfg;
    cfg.n_doc_types = 1;
    cfg.n_source_types = 1;
    cfg.n_topics = 3;
    cfg.h_z = 0.5;
    auto st = GibbsState::init(c, build_switch_mask(c), cfg);
    st.set_assignments({0}, {{0}}, {{0, 0, 1, 2, 2}});
    // Position 0 is a source word; the other source words sit on topics {0, 1}.
    auto p = normalize_log(st.word_topic_log_weights(0, 0));
    const double z = 3 * 0.5 + 2;
    CHECK(p[0] == doctest::Approx(1.5 / z).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(1.5 / z).epsilon(1e-12));
    CHECK(p[2] == doctest::Approx(0.5 / z).epsilon(1e-12));
}

TEST_CASE("log joint is invariant to relabeling types and topics") {
    auto s = story(6, 8);
    StmConfig cfg;
    cfg.seed = 9;
    auto st = GibbsState::init(s.corpus, build_switch_mask(s.corpus), cfg);
    for (int i = 0; i < 3; ++i) st.sweep();
    const double before = st.log_joint();
    auto perm = [](std::size_t x, std::size_t n) { return (x + 1) % n; };
    auto dt = st.doc_types();
    auto stypes = st.source_types();
    auto topics = st.word_topics();
    for (auto& t : dt) t = perm(t, cfg.n_doc_types);
    for (auto& v : stypes)
        for (auto& x : v) x = perm(x, cfg.n_source_types);
    for (auto& v : topics)
        for (auto& x : v) x = perm(x, cfg.n_topics);
    st.set_assignments(dt, stypes, topics);
    CHECK(std::abs(st.log_joint() - before) <= 1e-9);
}

TEST_CASE("zero sweeps return the initial state") {
    auto s = story(7, 4);
    StmConfig cfg;
    cfg.sweeps = 0;
    cfg.burn_in = 0;
    cfg.seed = 3;
    auto run = run_gibbs(s.corpus, build_switch_mask(s.corpus), cfg);
    CHECK(run.samples.empty());
    auto init = GibbsState::init(s.corpus, build_switch_mask(s.corpus), cfg);
    CHECK(run.state.doc_types() == init.doc_types());
    CHECK(run.state.word_topics() == init.word_topics());
}

TEST_CASE("runs are deterministic and thinned") {
    auto s = story(8, 6);
    StmConfig cfg;
    cfg.sweeps = 30;
    cfg.burn_in = 10;
    cfg.thin = 4;
    cfg.seed = 5;
    auto mask = build_switch_mask(s.corpus);
    auto a = run_gibbs(s.corpus, mask, cfg);
    auto b = run_gibbs(s.corpus, mask, cfg);
    CHECK(a.samples.size() == 5);
    CHECK(a.samples.front().sweep == 14);
    REQUIRE(a.samples.size() == b.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i) CHECK(a.samples[i].log_joint == b.samples[i].log_joint);
    CHECK_NOTHROW(a.state.audit());

    fixture::TempDir tmp("chain");
    write_chain_jsonl(a.state, a.samples, tmp.path / "c.jsonl");
    std::ifstream in(tmp.path / "c.jsonl");
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        auto j = nlohmann::json::parse(line);
        CHECK(j.contains("sweep"));
        CHECK(j.at("doc_type").size() == 6);
        ++n;
    }
    CHECK(n == a.samples.size());
}

TEST_CASE("short chains on the toy approach the enumerated posterior") {
    auto c = toy_corpus();
    auto cfg = toy_config();
    cfg.sweeps = 6000;
    cfg.burn_in = 100;
    cfg.seed = 41;
    auto docs = toy_docs();
    auto states = oracle::enumerate_assignments(docs, toy_model(cfg));
    std::vector<double> lw;
    for (const auto& a : states) lw.push_back(oracle::toy_log_joint(docs, a, toy_model(cfg)));
    auto exact = normalize_log(lw);
    auto run = run_gibbs(c, build_switch_mask(c), cfg);
    std::vector<double> freq(states.size(), 0.0);
    for (const auto& s : run.samples)
        for (std::size_t i = 0; i < states.size(); ++i)
            if (states[i].doc_types == s.doc_types && states[i].source_types == s.source_types &&
                states[i].topics == s.word_topics)
                freq[i] += 1.0 / static_cast<double>(run.samples.size());
    double l1 = 0;
    for (std::size_t i = 0; i < states.size(); ++i) l1 += std::abs(freq[i] - exact[i]);
    CHECK(l1 <= 0.15);
}

TEST_CASE("matched accuracy uses the best relabeling") {
    std::vector<std::size_t> truth{0, 0, 1, 1, 2, 2};
    std::vector<std::size_t> inferred{2, 2, 0, 0, 1, 1};
    CHECK(matched_accuracy(truth, inferred, 3) == 1.0);
    std::vector<std::size_t> half{2, 2, 0, 1, 1, 0};
    CHECK(matched_accuracy(truth, half, 3) == doctest::Approx(4.0 / 6.0));
}

}  // TEST_SUITE
