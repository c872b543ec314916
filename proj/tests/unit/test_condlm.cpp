#include <cmath>
#include <random>

#include <doctest.h>

#include "../oracles/ngram_recount.hpp"
#include "fixtures.hpp"
#include "srcplan/condlm.hpp"
#include "srcplan/error.hpp"

using namespace srcplan;
using Seqs = std::vector<std::pair<std::string, Tokens>>;

TEST_SUITE("condlm") {

TEST_CASE("hand counts: a a a b under one label") {
    auto m = ConditionalNGram::train_sequences("S", Seqs{{"L", {"a", "a", "a", "b"}}}, {1, 1.0, 1.0});
    CHECK(m.smoothing_cells() == 3);
    CHECK(std::exp(m.token_logprob("L", {}, "a")) == doctest::Approx(4.0 / 7.0).epsilon(1e-12));
}

TEST_CASE("hand counts: a a with two cells") {
    auto m = ConditionalNGram::train_sequences("S", Seqs{{"L", {"a", "a"}}}, {1, 1.0, 1.0});
    CHECK(m.token_logprob("L", {}, "a") == doctest::Approx(std::log(0.75)).epsilon(1e-12));
}

TEST_CASE("disjoint label vocabularies favour the owning label") {
    auto m = ConditionalNGram::train_sequences("S", Seqs{{"L", {"a", "a", "a"}}, {"M", {"b", "b", "b"}}}, {});
    CHECK(m.token_logprob("L", {}, "a") > m.token_logprob("M", {}, "a"));
}

TEST_CASE("lambda zero is the pooled model") {
    Seqs seqs{{"L", {"a", "b", "a"}}, {"M", {"b", "b", "c"}}};
    auto m0 = ConditionalNGram::train_sequences("S", seqs, {2, 0.5, 0.0});
    Seqs pooled{{"L", {"a", "b", "a"}}, {"L", {"b", "b", "c"}}};
    auto mg = ConditionalNGram::train_sequences("S", pooled, {2, 0.5, 1.0});
    for (const char* tok : {"a", "b", "c", "zzz"}) {
        Tokens ctx{"b"};
        CHECK(m0.token_logprob("M", ctx, tok) == doctest::Approx(mg.token_logprob("L", ctx, tok)).epsilon(1e-12));
    }
}

TEST_CASE("unseen token gets the smoothing floor") {
    NGramParams p{1, 0.5, 1.0};
    auto m = ConditionalNGram::train_sequences("S", Seqs{{"L", {"a", "b", "b"}}}, p);
    const double expect = std::log(0.5 / (3.0 + 0.5 * 3.0));
    CHECK(m.token_logprob("L", {}, "never") == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("probabilities over all cells sum to one") {
    Seqs seqs{{"L", {"a", "b", "a", "c"}}, {"M", {"c", "c", "b", "a"}}};
    auto m = ConditionalNGram::train_sequences("S", seqs, {3, 0.1, 0.7});
    std::vector<Tokens> contexts{{}, {"a"}, {"a", "b"}, {"c", "c"}, {"q", "a"}};
    for (const std::string label : {"L", "M", "Unseen"}) {
        for (const auto& ctx : contexts) {
            double sum = std::exp(m.token_logprob(label, ctx, "<unk-probe>"));
            for (const auto& w : m.vocab()) sum += std::exp(m.token_logprob(label, ctx, w));
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("sequence scores decompose into per-token terms") {
    Seqs seqs{{"L", {"a", "b", "a", "c"}}};
    auto m = ConditionalNGram::train_sequences("S", seqs, {3, 0.1, 0.7});
    auto one = m.sequence_logprob("L", Tokens{"b"});
    CHECK(one.total == m.token_logprob("L", {}, "b"));
    auto two = m.sequence_logprob("L", Tokens{"a", "b"});
    CHECK(two.per_token[0] + two.per_token[1] == doctest::Approx(two.total).epsilon(1e-12));
    CHECK(two.per_token[1] == m.token_logprob("L", Tokens{"a"}, "b"));
    CHECK_THROWS_AS(m.sequence_logprob("L", Tokens{}), std::invalid_argument);
}

TEST_CASE("untrained cells give n ln(1/C)") {
    auto m = ConditionalNGram::train_sequences("S", Seqs{{"L", {"a", "b", "c"}}}, {1, 0.3, 1.0});
    const double C = static_cast<double>(m.smoothing_cells());
    auto s = m.sequence_logprob("NoSuchLabel", Tokens{"a", "b", "x", "y", "a"});
    CHECK(s.total == doctest::Approx(5.0 * std::log(1.0 / C)).epsilon(1e-12));
}

TEST_CASE("brute-force recount agrees on random corpora") {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 5; ++trial) {
        std::uniform_int_distribution<int> vocab_size(2, 6), len(1, 30), n_seq(1, 8);
        const int V = vocab_size(rng);
        oracle::Corpus train;
        Seqs seqs;
        const int n = n_seq(rng);
        for (int i = 0; i < n; ++i) {
            std::string label = "L" + std::to_string(rng() % 3);
            Tokens t;
            for (int j = len(rng); j > 0; --j) t.push_back("w" + std::to_string(rng() % V));
            train.emplace_back(label, t);
            seqs.emplace_back(label, t);
        }
        NGramParams p{1 + rng() % 4, 0.05 + 0.5 * static_cast<double>(rng() % 100) / 100.0,
                      static_cast<double>(rng() % 101) / 100.0};
        auto m = ConditionalNGram::train_sequences("S", seqs, p);
        for (int q = 0; q < 5; ++q) {
            Tokens query;
            for (int j = len(rng); j > 0; --j) query.push_back("w" + std::to_string(rng() % (V + 1)));
            std::string label = "L" + std::to_string(rng() % 4);
            const double want = oracle::ngram_logprob(train, p.order, p.alpha, p.lambda, label, query);
            CHECK(std::abs(m.sequence_logprob(label, query).total - want) <= 1e-9);
        }
    }
}

TEST_CASE("train uses train-split documents only") {
    Corpus c;
    fixture::add_doc(c, "t", {"alpha beta"}, {"L"}, Split::train);
    fixture::add_doc(c, "e", {"gamma delta"}, {"L"}, Split::eval);
    SchemaDef schema{"Toy", {"L", "M"}};
    auto m = ConditionalNGram::train(c, schema, c.labelings_for("Toy"), {});
    CHECK(m.vocab() == std::vector<std::string>{"alpha", "beta"});
}

TEST_CASE("train rejects missing labelings and an empty train split") {
    SchemaDef schema{"Toy", {"L", "M"}};
    Corpus c;
    fixture::add_doc(c, "t", {"alpha"}, {}, Split::train);
    CHECK_THROWS_AS(ConditionalNGram::train(c, schema, {}, {}), DataError);

    Corpus only_eval;
    fixture::add_doc(only_eval, "e", {"alpha"}, {"L"}, Split::eval);
    CHECK_THROWS_AS(ConditionalNGram::train(only_eval, schema, only_eval.labelings_for("Toy"), {}), DataError);

    Corpus bad_label;
    fixture::add_doc(bad_label, "t", {"alpha"}, {"Z"}, Split::train);
    CHECK_THROWS_AS(ConditionalNGram::train(bad_label, schema, bad_label.labelings_for("Toy"), {}), DataError);
}

TEST_CASE("JSON round trip is exact") {
    Seqs seqs{{"L", {"a", "b", "a", "c"}}, {"M", {"c", "c", "b"}}};
    auto m = ConditionalNGram::train_sequences("S", seqs, {3, 0.25, 0.6});
    auto again = ConditionalNGram::from_json(m.to_json());
    CHECK(again == m);
    CHECK(again.to_json().dump() == m.to_json().dump());
    CHECK(again.sequence_logprob("M", Tokens{"c", "b", "a"}).total ==
          m.sequence_logprob("M", Tokens{"c", "b", "a"}).total);
}

TEST_CASE("context totals equal the sum of their counts") {
    Seqs seqs{{"L", {"a", "b", "a", "c", "a", "b"}}, {"M", {"c", "c", "b"}}};
    auto m = ConditionalNGram::train_sequences("S", seqs, {2, 0.1, 0.7});
    for (const auto& label : m.labels())
        for (const auto& [ctx, cc] : *m.label_table(label)) {
            std::uint64_t sum = 0;
            for (const auto& [_, n] : cc.counts) sum += n;
            CHECK(sum == cc.total);
        }
}

TEST_CASE("rejects invalid hyperparameters") {
    Seqs seqs{{"L", {"a"}}};
    CHECK_THROWS_AS(ConditionalNGram::train_sequences("S", seqs, {0, 0.1, 0.5}), UsageError);
    CHECK_THROWS_AS(ConditionalNGram::train_sequences("S", seqs, {2, 0.0, 0.5}), UsageError);
    CHECK_THROWS_AS(ConditionalNGram::train_sequences("S", seqs, {2, 0.1, 1.5}), UsageError);
}

}  // TEST_SUITE
