#include <cmath>
#include <numeric>
#include <set>

#include <doctest.h>

#include "fixtures.hpp"
#include "srcplan/criticism.hpp"
#include "srcplan/error.hpp"
#include "srcplan/synth.hpp"

using namespace srcplan;

namespace {

std::vector<std::string> labels_of(const Labeling& l) {
    std::vector<std::string> out;
    for (const auto& [_, v] : l.assignments) out.push_back(v);
    return out;
}

// Two labels with disjoint vocabularies, two sources per document.
Corpus disjoint_corpus() {
    Corpus c;
    for (int i = 0; i < 12; ++i) {
        const bool flip = i % 2;
        std::vector<std::string> texts{"a a b a b", "x y y x x"}, labels{"L", "M"};
        if (flip) {
            std::swap(texts[0], texts[1]);
            std::swap(labels[0], labels[1]);
        }
        fixture::add_doc(c, "d" + std::to_string(i), texts, labels, i < 8 ? Split::train : Split::eval);
    }
    return c;
}

}  // namespace

TEST_SUITE("criticism") {

TEST_CASE("shuffle of one source is the identity") {
    auto l = fixture::make_labeling("Toy", {"L"});
    auto s = shuffle_labels(l, 3);
    CHECK(s.assignments == l.assignments);
    CHECK(s.provenance == Provenance::shuffled);
}

TEST_CASE("shuffle of two distinct labels swaps them") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto s = shuffle_labels(fixture::make_labeling("Toy", {"L", "M"}), seed);
        CHECK(s.assignments.at("s0") == "M");
        CHECK(s.assignments.at("s1") == "L");
    }
}

TEST_CASE("shuffle of a constant labeling leaves it unchanged") {
    auto l = fixture::make_labeling("Toy", {"L", "L", "L", "L"});
    CHECK(shuffle_labels(l, 9).assignments == l.assignments);
}

TEST_CASE("shuffle keeps the multiset and changes as many labels as it can") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng() % 7;
        std::vector<std::string> labels;
        for (std::size_t i = 0; i < n; ++i) labels.push_back("L" + std::to_string(rng() % 3));
        auto l = fixture::make_labeling("Toy", labels);
        auto s = shuffle_labels(l, rng());
        auto a = labels_of(l), b = labels_of(s);
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        CHECK(a == b);

        std::map<std::string, std::size_t> freq;
        for (const auto& x : labels) ++freq[x];
        std::size_t top = 0;
        for (const auto& [_, c] : freq) top = std::max(top, c);
        const std::size_t reachable = 2 * top <= n ? n : 2 * (n - top);
        std::size_t changed = 0;
        for (const auto& [sid, lab] : l.assignments) changed += s.assignments.at(sid) != lab;
        CHECK(changed == reachable);
    }
}

TEST_CASE("shuffle is deterministic in its seed") {
    auto l = fixture::make_labeling("Toy", {"A", "B", "C", "D", "E"});
    CHECK(shuffle_labels(l, 77) == shuffle_labels(l, 77));
}

TEST_CASE("negative-prompting closed forms") {
    std::vector<double> half(6, std::log(0.5));
    CHECK(negprompt_perplexity(half, {}, 1.0) == doctest::Approx(2.0).epsilon(1e-12));
    std::vector<double> lp{-0.3, -1.7, -2.2};
    CHECK(negprompt_perplexity(lp, lp, 0.5) == 1.0);
    std::vector<double> t(5, -1.0), s(5, -2.0);
    CHECK(negprompt_perplexity(t, s, 0.5) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
    CHECK_THROWS_AS(negprompt_perplexity({}, {}, 0.5), DataError);
}

TEST_CASE("gamma outside [0.5, 1] is rejected") {
    NegPromptConfig cfg;
    cfg.gamma = 0.3;
    CHECK_THROWS_AS(cfg.validate(), UsageError);
    cfg.gamma = 1.01;
    CHECK_THROWS_AS(cfg.validate(), UsageError);
}

TEST_CASE("gamma one ignores the shuffled labeling") {
    auto c = disjoint_corpus();
    SchemaDef schema{"Toy", {"L", "M"}};
    auto labs = c.labelings_for("Toy");
    auto m = ConditionalNGram::train(c, schema, labs, {});
    const auto& doc = c.documents.back();
    const auto& lab = labs.at(doc.id);
    const double base = conditional_perplexity(m, doc, lab, lab, 1.0);
    for (std::uint64_t seed = 0; seed < 10; ++seed)
        CHECK(conditional_perplexity(m, doc, lab, shuffle_labels(lab, seed), 1.0) == base);
}

TEST_CASE("true labels beat shuffled labels on separated data") {
    SynthSpec spec;
    spec.n_docs = 200;
    spec.separation = 1.0;
    spec.seed = 11;
    auto synth = generate_corpus(spec);
    const auto& schema = synth.registry.at("Planted");
    auto labs = synth.corpus.labelings_for("Planted");
    // Default trigram model. On much smaller corpora a seen context can score
    // an unseen token below the uniform mass of an unseen context.
    auto m = ConditionalNGram::train(synth.corpus, schema, labs, {});
    for (const Document* d : synth.corpus.documents_in(Split::eval)) {
        const auto& lab = labs.at(d->id);
        std::set<std::string> distinct;
        for (const auto& [_, l] : lab.assignments) distinct.insert(l);
        auto shuffled = shuffle_labels(lab, 1);
        const double truth = conditional_perplexity(m, *d, lab, lab, 1.0);
        const double wrong = conditional_perplexity(m, *d, shuffled, shuffled, 1.0);
        if (distinct.size() >= 2)
            CHECK(truth < wrong);
        else
            CHECK(truth <= wrong);
    }
}

TEST_CASE("renaming labels everywhere leaves perplexities unchanged") {
    auto c = disjoint_corpus();
    SchemaDef schema{"Toy", {"L", "M"}};
    Corpus renamed = c;
    for (auto& [key, lab] : renamed.labelings)
        for (auto& [_, l] : lab.assignments) l = l == "L" ? "zeta" : "alpha";
    SchemaDef schema2{"Toy", {"zeta", "alpha"}};
    NegPromptConfig cfg{0.5, 4};
    auto m1 = ConditionalNGram::train(c, schema, c.labelings_for("Toy"), {});
    auto m2 = ConditionalNGram::train(renamed, schema2, renamed.labelings_for("Toy"), {});
    auto p1 = document_perplexities(c, m1, c.labelings_for("Toy"), cfg);
    auto p2 = document_perplexities(renamed, m2, renamed.labelings_for("Toy"), cfg);
    REQUIRE(p1.size() == p2.size());
    for (const auto& [id, v] : p1) CHECK(std::abs(v - p2.at(id)) <= 1e-12);
}

TEST_CASE("report mean is the arithmetic mean and identical baselines give delta zero") {
    std::map<std::string, double> ppl{{"a", 3.0}, {"b", 5.5}, {"c", 1.25}};
    auto r = make_perplexity_report("S", ppl, {{"same", ppl}});
    CHECK(r.mean == doctest::Approx((3.0 + 5.5 + 1.25) / 3.0).epsilon(1e-12));
    CHECK(r.delta_vs_baseline.at("same") == 0.0);
    CHECK(r.t_test_p.at("same") == doctest::Approx(1.0));
}

TEST_CASE("schema report against its own labeling as baseline") {
    auto c = disjoint_corpus();
    SchemaDef schema{"Toy", {"L", "M"}};
    auto labs = c.labelings_for("Toy");
    auto m = ConditionalNGram::train(c, schema, labs, {});
    BaselineGenerator self{"self", [&](const Corpus&, std::size_t) { return labs; }};
    auto r = schema_perplexity_report(c, schema, m, labs, {self}, {});
    CHECK(r.delta_vs_baseline.at("self") == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.t_test_p.at("self") == doctest::Approx(1.0));

    Corpus no_eval = c;
    for (auto& [_, s] : no_eval.split) s = Split::train;
    CHECK_THROWS_AS(schema_perplexity_report(no_eval, schema, m, labs, {}, {}), DataError);
}

TEST_CASE("cross-fitted perplexities cover every train document") {
    auto c = disjoint_corpus();
    SchemaDef schema{"Toy", {"L", "M"}};
    auto out = crossfit_perplexities(c, schema, c.labelings_for("Toy"), {}, {}, 4);
    CHECK(out.size() == c.documents_in(Split::train).size());
    CHECK_THROWS_AS(crossfit_perplexities(c, schema, c.labelings_for("Toy"), {}, {}, 1), UsageError);
}

TEST_CASE("pp features: single source and co-label counts") {
    Corpus c;
    fixture::add_doc(c, "one", {"only"}, {"L"}, Split::train, "Toy", "big news");
    SchemaDef schema{"Toy", {"L", "M"}};
    auto set = build_pp_instances(c, schema, c.labelings_for("Toy"), 4, 1);
    REQUIRE(set.train.size() == 1);
    const auto& inst = set.train[0];
    CHECK(inst.held_out_source == "s0");
    CHECK(inst.held_out_label == "L");
    const std::size_t V = set.featurizer.headline_vocab().size();
    for (const auto& [idx, val] : inst.features) CHECK((idx < V || idx >= V + 2));

    PPFeaturizer f = set.featurizer;
    std::vector<std::string> remaining{"L", "L"};
    auto x = f.features("big", remaining, 2);
    std::map<std::size_t, double> dense(x.begin(), x.end());
    CHECK(dense.at(V + 0) == 2.0);
    CHECK_FALSE(dense.contains(V + 1));
    CHECK(dense.at(V + 2 + 2) == 1.0);
    CHECK(f.n_features() == V + 2 + 4);
}

TEST_CASE("pp instances are deterministic and hold out one of the top sources") {
    SynthSpec spec;
    spec.n_docs = 30;
    spec.sources_per_doc = 6;
    auto synth = generate_corpus(spec);
    const auto& schema = synth.registry.at("Planted");
    auto labs = synth.corpus.labelings_for("Planted");
    auto a = build_pp_instances(synth.corpus, schema, labs, 4, 8);
    auto b = build_pp_instances(synth.corpus, schema, labs, 4, 8);
    REQUIRE(a.train.size() == b.train.size());
    for (std::size_t i = 0; i < a.train.size(); ++i) {
        CHECK(a.train[i].held_out_source == b.train[i].held_out_source);
        CHECK(a.train[i].features == b.train[i].features);
        CHECK(a.train[i].held_out_rank < 4);
        const Document* d = synth.corpus.find(a.train[i].doc_id);
        auto top = top_k_sources(*d, 4);
        CHECK(top[a.train[i].held_out_rank] == a.train[i].held_out_source);
    }
    CHECK(a.train.size() + a.eval.size() == synth.corpus.documents.size());
}

TEST_CASE("pp classifier: separable data, single class") {
    PPInstanceSet set;
    for (int i = 0; i < 20; ++i) {
        PPInstance inst;
        const bool pos = i % 2;
        inst.features = {{pos ? 0u : 1u, 1.0}};
        inst.held_out_label = pos ? "L" : "M";
        set.train.push_back(inst);
    }
    auto clf = train_pp_classifier(set, {1e-4, 500, 0.5});
    auto report = evaluate_pp_f1(clf, set.train, 100, 3);
    CHECK(report.micro_f1 == 1.0);

    PPInstanceSet single;
    single.train = {set.train[0], set.train[2]};
    auto constant = train_pp_classifier(single, {});
    CHECK(constant.is_constant());
    CHECK_THROWS_AS(train_pp_classifier(PPInstanceSet{}, {}), DataError);
}

TEST_CASE("constant predictor scores the majority share") {
    PPInstanceSet set;
    std::vector<std::string> truth{"L", "L", "L", "M", "N"};
    for (const auto& t : truth) {
        PPInstance inst;
        inst.held_out_label = t;
        set.eval.push_back(inst);
    }
    PPInstanceSet train;
    train.train = {set.eval[0]};
    auto constant = train_pp_classifier(train, {});
    auto r = evaluate_pp_f1(constant, set.eval, 0, 1);
    CHECK(r.micro_f1 == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("micro F1 equals the share of correct predictions") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::string> p, t;
        std::size_t correct = 0;
        const std::size_t n = 1 + rng() % 50;
        for (std::size_t i = 0; i < n; ++i) {
            p.push_back("c" + std::to_string(rng() % 3));
            t.push_back("c" + std::to_string(rng() % 3));
            correct += p.back() == t.back();
        }
        CHECK(micro_f1(p, t) == doctest::Approx(static_cast<double>(correct) / static_cast<double>(n)).epsilon(1e-12));
    }
}

TEST_CASE("compare_pp ratio and bootstrap p") {
    PosteriorPredictiveReport a, b;
    a.micro_f1 = 0.8;
    b.micro_f1 = 0.4;
    a.bootstrap_f1.assign(100, 0.8);
    b.bootstrap_f1.assign(100, 0.4);
    compare_pp(a, "base-r", b);
    CHECK(a.ratio_vs_baseline.at("base-r") == doctest::Approx(2.0));
    CHECK(a.bootstrap_p.at("base-r") == 0.0);
    PosteriorPredictiveReport c = b;
    compare_pp(c, "self", b);
    CHECK(c.bootstrap_p.at("self") == 1.0);
}

}  // TEST_SUITE
