#include "srcplan/stm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "srcplan/error.hpp"

namespace srcplan {

void StmConfig::validate() const {
    if (n_doc_types < 1 || n_source_types < 1 || n_topics < 1)
        throw UsageError("stm: type and topic counts must be at least 1");
    if (!(h_T > 0.0 && h_S > 0.0 && h_z > 0.0 && h_w > 0.0))
        throw UsageError("stm: hyperpriors must be positive");
    if (sweeps > 0 && burn_in >= sweeps) throw UsageError("stm: burn_in must be below sweeps");
    if (thin < 1) throw UsageError("stm: thin must be at least 1");
}

SwitchMask build_switch_mask(const Corpus& corpus) {
    SwitchMask mask;
    for (const auto& doc : corpus.documents) {
        std::vector<int> sentence_owner(doc.sentences.size(), SwitchMask::kBackground);
        for (std::size_t s = 0; s < doc.sources.size(); ++s)
            for (std::size_t idx : doc.sources[s].sentence_indices) sentence_owner[idx] = static_cast<int>(s);
        SwitchMask::DocMask dm{doc.id, {}};
        for (std::size_t i = 0; i < doc.sentences.size(); ++i) {
            const std::size_t n = tokenize(doc.sentences[i]).size();
            dm.owner.insert(dm.owner.end(), n, sentence_owner[i]);
        }
        mask.docs.push_back(std::move(dm));
    }
    return mask;
}

namespace {

// log of prod_{i} Gamma(h + a_i + b_i) / Gamma(h + a_i) over the cells where
// b is non-zero: the sequential Dirichlet-multinomial predictive of b given a.
double log_rising(double base, std::int64_t add) {
    return add == 0 ? 0.0 : std::lgamma(base + static_cast<double>(add)) - std::lgamma(base);
}

// Collapsed Dirichlet-multinomial log marginal of one count vector.
template <typename Get>
double log_dirmult(std::size_t n, double h, Get get) {
    double sum = 0.0, out = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double c = static_cast<double>(get(i));
        sum += c;
        if (c > 0.0) out += std::lgamma(c + h) - std::lgamma(h);
    }
    return out + std::lgamma(static_cast<double>(n) * h) - std::lgamma(sum + static_cast<double>(n) * h);
}

}  // namespace

GibbsState GibbsState::init(const Corpus& corpus, const SwitchMask& mask, const StmConfig& cfg) {
    cfg.validate();
    if (mask.docs.size() != corpus.documents.size())
        throw DataError("switch mask covers " + std::to_string(mask.docs.size()) + " documents, corpus has " +
                        std::to_string(corpus.documents.size()));
    const SwitchMask expected = build_switch_mask(corpus);

    GibbsState st;
    st.cfg_ = cfg;
    std::set<std::string> vocab;
    std::vector<Tokens> doc_tokens;
    for (std::size_t d = 0; d < corpus.documents.size(); ++d) {
        const auto& doc = corpus.documents[d];
        const auto& dm = mask.docs[d];
        if (dm.doc_id != doc.id) throw DataError("switch mask document order differs at '" + doc.id + "'");
        if (dm.owner != expected.docs[d].owner)
            throw DataError("document '" + doc.id + "': switch mask disagrees with attribution");
        Tokens toks;
        for (const auto& s : doc.sentences) {
            auto t = tokenize(s);
            toks.insert(toks.end(), t.begin(), t.end());
        }
        vocab.insert(toks.begin(), toks.end());
        doc_tokens.push_back(std::move(toks));
    }
    st.vocab_.assign(vocab.begin(), vocab.end());
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < st.vocab_.size(); ++i) index.emplace(st.vocab_[i], i);

    st.rng_.seed(cfg.seed);
    for (std::size_t d = 0; d < corpus.documents.size(); ++d) {
        const auto& doc = corpus.documents[d];
        st.doc_ids_.push_back(doc.id);
        std::vector<std::string> sids;
        for (const auto& s : doc.sources) sids.push_back(s.source_id);
        st.source_ids_.push_back(std::move(sids));
        std::vector<std::size_t> words;
        for (const auto& t : doc_tokens[d]) words.push_back(index.at(t));
        st.words_.push_back(std::move(words));
        st.owner_.push_back(mask.docs[d].owner);

        std::vector<std::vector<std::size_t>> spos(doc.sources.size());
        std::vector<std::size_t> bpos;
        for (std::size_t i = 0; i < st.owner_[d].size(); ++i) {
            const int o = st.owner_[d][i];
            if (o == SwitchMask::kBackground)
                bpos.push_back(i);
            else
                spos[static_cast<std::size_t>(o)].push_back(i);
        }
        st.source_positions_.push_back(std::move(spos));
        st.background_positions_.push_back(std::move(bpos));

        st.doc_type_.push_back(uniform_index(st.rng_, cfg.n_doc_types));
        std::vector<std::size_t> stypes;
        for (std::size_t s = 0; s < doc.sources.size(); ++s) stypes.push_back(uniform_index(st.rng_, cfg.n_source_types));
        st.source_type_.push_back(std::move(stypes));
        std::vector<std::size_t> topics;
        for (std::size_t i = 0; i < st.words_[d].size(); ++i) topics.push_back(uniform_index(st.rng_, cfg.n_topics));
        st.word_topic_.push_back(std::move(topics));
    }
    st.rebuild_counts();
    return st;
}

void GibbsState::rebuild_counts() {
    const std::size_t T = cfg_.n_doc_types, S = cfg_.n_source_types, K = cfg_.n_topics;
    c_T_.assign(T, 0);
    c_TS_ = CountMatrix(T, S);
    c_TS_sum_.assign(T, 0);
    c_Sz_ = CountMatrix(S, K);
    c_Sz_sum_.assign(S, 0);
    c_Tz_ = CountMatrix(T, K);
    c_Tz_sum_.assign(T, 0);
    c_zw_ = CountMatrix(K, vocab_.size());
    c_z_.assign(K, 0);
    for (std::size_t d = 0; d < doc_ids_.size(); ++d) {
        const std::size_t t = doc_type_[d];
        ++c_T_[t];
        for (std::size_t s : source_type_[d]) {
            ++c_TS_(t, s);
            ++c_TS_sum_[t];
        }
        for (std::size_t i = 0; i < words_[d].size(); ++i) {
            const std::size_t k = word_topic_[d][i];
            ++c_zw_(k, words_[d][i]);
            ++c_z_[k];
            const int o = owner_[d][i];
            if (o == SwitchMask::kBackground) {
                ++c_Tz_(t, k);
                ++c_Tz_sum_[t];
            } else {
                const std::size_t s = source_type_[d][static_cast<std::size_t>(o)];
                ++c_Sz_(s, k);
                ++c_Sz_sum_[s];
            }
        }
    }
}

void GibbsState::set_assignments(std::vector<std::size_t> doc_types,
                                 std::vector<std::vector<std::size_t>> source_types,
                                 std::vector<std::vector<std::size_t>> word_topics) {
    if (doc_types.size() != n_docs() || source_types.size() != n_docs() || word_topics.size() != n_docs())
        throw std::invalid_argument("set_assignments: wrong number of documents");
    for (std::size_t d = 0; d < n_docs(); ++d) {
        if (doc_types[d] >= cfg_.n_doc_types) throw std::invalid_argument("doc type out of range");
        if (source_types[d].size() != n_sources(d) || word_topics[d].size() != n_tokens(d))
            throw std::invalid_argument("set_assignments: shape mismatch");
        for (auto s : source_types[d])
            if (s >= cfg_.n_source_types) throw std::invalid_argument("source type out of range");
        for (auto k : word_topics[d])
            if (k >= cfg_.n_topics) throw std::invalid_argument("topic out of range");
    }
    doc_type_ = std::move(doc_types);
    source_type_ = std::move(source_types);
    word_topic_ = std::move(word_topics);
    rebuild_counts();
}

void GibbsState::add_doc_type(std::size_t doc, std::size_t t, int delta) {
    c_T_[t] += delta;
    for (std::size_t s : source_type_[doc]) {
        c_TS_(t, s) += delta;
        c_TS_sum_[t] += delta;
    }
    for (std::size_t i : background_positions_[doc]) {
        c_Tz_(t, word_topic_[doc][i]) += delta;
        c_Tz_sum_[t] += delta;
    }
}

void GibbsState::add_source_type(std::size_t doc, std::size_t source, std::size_t s, int delta) {
    c_TS_(doc_type_[doc], s) += delta;
    c_TS_sum_[doc_type_[doc]] += delta;
    for (std::size_t i : source_positions_[doc][source]) {
        c_Sz_(s, word_topic_[doc][i]) += delta;
        c_Sz_sum_[s] += delta;
    }
}

void GibbsState::add_word_topic(std::size_t doc, std::size_t position, std::size_t k, int delta) {
    c_zw_(k, words_[doc][position]) += delta;
    c_z_[k] += delta;
    const int o = owner_[doc][position];
    if (o == SwitchMask::kBackground) {
        c_Tz_(doc_type_[doc], k) += delta;
        c_Tz_sum_[doc_type_[doc]] += delta;
    } else {
        const std::size_t s = source_type_[doc][static_cast<std::size_t>(o)];
        c_Sz_(s, k) += delta;
        c_Sz_sum_[s] += delta;
    }
}

// p(T_d = t | rest) is proportional to
//   (h_T + c_T^{-d}[t])
//   * prod over the document's sources, in order, of the Dirichlet-multinomial
//     predictive of its source type under doc type t, where the counts are
//     those of all other documents plus the document's earlier sources;
//   * the same sequential predictive for its background-word topics.
// Each sequential product collapses to a ratio of Gamma functions, which is
// what is computed below. The enumeration oracle in the tests fixes this
// reading of the per-source denominator as the exact collapsed conditional.
std::vector<double> GibbsState::doc_type_log_weights(std::size_t doc) const {
    const std::size_t T = cfg_.n_doc_types, S = cfg_.n_source_types, K = cfg_.n_topics;
    const std::size_t cur = doc_type_[doc];
    std::vector<std::int64_t> own_s(S, 0), own_z(K, 0);
    for (std::size_t s : source_type_[doc]) ++own_s[s];
    for (std::size_t i : background_positions_[doc]) ++own_z[word_topic_[doc][i]];
    const auto n_src = static_cast<std::int64_t>(source_type_[doc].size());
    const auto n_bg = static_cast<std::int64_t>(background_positions_[doc].size());

    std::vector<double> out(T);
    for (std::size_t t = 0; t < T; ++t) {
        const bool self = t == cur;
        double lw = std::log(cfg_.h_T + static_cast<double>(c_T_[t] - (self ? 1 : 0)));
        for (std::size_t s = 0; s < S; ++s) {
            const auto rest = c_TS_(t, s) - (self ? own_s[s] : 0);
            lw += log_rising(cfg_.h_S + static_cast<double>(rest), own_s[s]);
        }
        const auto rest_src = c_TS_sum_[t] - (self ? n_src : 0);
        lw -= log_rising(static_cast<double>(S) * cfg_.h_S + static_cast<double>(rest_src), n_src);
        for (std::size_t k = 0; k < K; ++k) {
            const auto rest = c_Tz_(t, k) - (self ? own_z[k] : 0);
            lw += log_rising(cfg_.h_z + static_cast<double>(rest), own_z[k]);
        }
        const auto rest_bg = c_Tz_sum_[t] - (self ? n_bg : 0);
        lw -= log_rising(static_cast<double>(K) * cfg_.h_z + static_cast<double>(rest_bg), n_bg);
        out[t] = lw;
    }
    return out;
}

// p(S_{d,n} = s | rest) is proportional to
//   (h_S + c_TS^{-(d,n)}[T_d, s]) * sequential predictive of the source's
//   word topics under source type s, counts excluding this source's words.
std::vector<double> GibbsState::source_type_log_weights(std::size_t doc, std::size_t source) const {
    const std::size_t S = cfg_.n_source_types, K = cfg_.n_topics;
    const std::size_t cur = source_type_[doc][source];
    const std::size_t t = doc_type_[doc];
    std::vector<std::int64_t> own_z(K, 0);
    for (std::size_t i : source_positions_[doc][source]) ++own_z[word_topic_[doc][i]];
    const auto n_w = static_cast<std::int64_t>(source_positions_[doc][source].size());

    std::vector<double> out(S);
    for (std::size_t s = 0; s < S; ++s) {
        const bool self = s == cur;
        double lw = std::log(cfg_.h_S + static_cast<double>(c_TS_(t, s) - (self ? 1 : 0)));
        for (std::size_t k = 0; k < K; ++k) {
            const auto rest = c_Sz_(s, k) - (self ? own_z[k] : 0);
            lw += log_rising(cfg_.h_z + static_cast<double>(rest), own_z[k]);
        }
        const auto rest_sum = c_Sz_sum_[s] - (self ? n_w : 0);
        lw -= log_rising(static_cast<double>(K) * cfg_.h_z + static_cast<double>(rest_sum), n_w);
        out[s] = lw;
    }
    return out;
}

// p(z = k | rest) is proportional to (prevalence count + h_z) times
// (c_zw[k, w] + h_w) / (c_z[k] + V h_w), all excluding the current word.
// Prevalence is keyed on the owning source's type for source words and on
// the document type for background words.
std::vector<double> GibbsState::word_topic_log_weights(std::size_t doc, std::size_t position) const {
    const std::size_t K = cfg_.n_topics;
    const std::size_t cur = word_topic_[doc][position];
    const std::size_t w = words_[doc][position];
    const int o = owner_[doc][position];
    const double vh = static_cast<double>(vocab_.size()) * cfg_.h_w;
    std::vector<double> out(K);
    for (std::size_t k = 0; k < K; ++k) {
        const std::int64_t self = k == cur ? 1 : 0;
        const std::int64_t prevalence = o == SwitchMask::kBackground
                                            ? c_Tz_(doc_type_[doc], k)
                                            : c_Sz_(source_type_[doc][static_cast<std::size_t>(o)], k);
        out[k] = std::log(cfg_.h_z + static_cast<double>(prevalence - self)) +
                 std::log(static_cast<double>(c_zw_(k, w) - self) + cfg_.h_w) -
                 std::log(static_cast<double>(c_z_[k] - self) + vh);
    }
    return out;
}

void GibbsState::sample_doc_type(std::size_t doc) {
    auto lw = doc_type_log_weights(doc);
    const std::size_t next = sample_log_weights(rng_, lw, scratch_);
    if (next == doc_type_[doc]) return;
    add_doc_type(doc, doc_type_[doc], -1);
    doc_type_[doc] = next;
    add_doc_type(doc, next, +1);
}

void GibbsState::sample_source_type(std::size_t doc, std::size_t source) {
    auto lw = source_type_log_weights(doc, source);
    const std::size_t next = sample_log_weights(rng_, lw, scratch_);
    if (next == source_type_[doc][source]) return;
    add_source_type(doc, source, source_type_[doc][source], -1);
    source_type_[doc][source] = next;
    add_source_type(doc, source, next, +1);
}

void GibbsState::sample_word_topic(std::size_t doc, std::size_t position) {
    auto lw = word_topic_log_weights(doc, position);
    const std::size_t next = sample_log_weights(rng_, lw, scratch_);
    if (next == word_topic_[doc][position]) return;
    add_word_topic(doc, position, word_topic_[doc][position], -1);
    word_topic_[doc][position] = next;
    add_word_topic(doc, position, next, +1);
}

void GibbsState::sweep() {
    for (std::size_t d = 0; d < n_docs(); ++d) sample_doc_type(d);
    for (std::size_t d = 0; d < n_docs(); ++d)
        for (std::size_t s = 0; s < n_sources(d); ++s) sample_source_type(d, s);
    for (std::size_t d = 0; d < n_docs(); ++d)
        for (std::size_t i = 0; i < n_tokens(d); ++i) sample_word_topic(d, i);
}

double GibbsState::log_joint() const {
    const std::size_t T = cfg_.n_doc_types, S = cfg_.n_source_types, K = cfg_.n_topics, V = vocab_.size();
    double lj = log_dirmult(T, cfg_.h_T, [&](std::size_t t) { return c_T_[t]; });
    for (std::size_t t = 0; t < T; ++t)
        lj += log_dirmult(S, cfg_.h_S, [&](std::size_t s) { return c_TS_(t, s); });
    for (std::size_t s = 0; s < S; ++s)
        lj += log_dirmult(K, cfg_.h_z, [&](std::size_t k) { return c_Sz_(s, k); });
    for (std::size_t t = 0; t < T; ++t)
        lj += log_dirmult(K, cfg_.h_z, [&](std::size_t k) { return c_Tz_(t, k); });
    if (V > 0)
        for (std::size_t k = 0; k < K; ++k)
            lj += log_dirmult(V, cfg_.h_w, [&](std::size_t w) { return c_zw_(k, w); });
    return lj;
}

void GibbsState::audit() const {
    GibbsState fresh = *this;
    fresh.rebuild_counts();
    auto check = [](bool ok, const char* what) {
        if (!ok) throw std::logic_error(std::string("gibbs count audit failed: ") + what);
    };
    check(fresh.c_T_ == c_T_, "c_T");
    check(fresh.c_TS_ == c_TS_ && fresh.c_TS_sum_ == c_TS_sum_, "c_TS");
    check(fresh.c_Sz_ == c_Sz_ && fresh.c_Sz_sum_ == c_Sz_sum_, "c_Sz");
    check(fresh.c_Tz_ == c_Tz_ && fresh.c_Tz_sum_ == c_Tz_sum_, "c_Tz");
    check(fresh.c_zw_ == c_zw_, "c_zw");
    check(fresh.c_z_ == c_z_, "c_z");
}

GibbsRun run_gibbs(const Corpus& corpus, const SwitchMask& mask, const StmConfig& cfg) {
    GibbsRun run{GibbsState::init(corpus, mask, cfg), {}};
    for (std::size_t sweep = 1; sweep <= cfg.sweeps; ++sweep) {
        run.state.sweep();
        if (sweep <= cfg.burn_in || (sweep - cfg.burn_in) % cfg.thin != 0) continue;
        GibbsSample s;
        s.sweep = sweep;
        s.doc_types = run.state.doc_types();
        s.source_types = run.state.source_types();
        if (cfg.store_word_topics) s.word_topics = run.state.word_topics();
        s.log_joint = run.state.log_joint();
        run.samples.push_back(std::move(s));
    }
    return run;
}

void write_chain_jsonl(const GibbsState& state, std::span<const GibbsSample> samples,
                       const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    for (const auto& s : samples) {
        nlohmann::json doc_types = nlohmann::json::object();
        nlohmann::json source_types = nlohmann::json::object();
        for (std::size_t d = 0; d < state.n_docs(); ++d) {
            doc_types[state.doc_id(d)] = s.doc_types[d];
            nlohmann::json per = nlohmann::json::object();
            for (std::size_t n = 0; n < state.n_sources(d); ++n) per[state.source_id(d, n)] = s.source_types[d][n];
            source_types[state.doc_id(d)] = std::move(per);
        }
        out << nlohmann::json{{"sweep", s.sweep},
                              {"doc_type", std::move(doc_types)},
                              {"source_type", std::move(source_types)},
                              {"log_joint", s.log_joint}}
                   .dump()
            << '\n';
    }
}

double matched_accuracy(std::span<const std::size_t> truth, std::span<const std::size_t> inferred,
                        std::size_t n_classes) {
    if (truth.size() != inferred.size()) throw std::invalid_argument("matched_accuracy: length mismatch");
    if (truth.empty()) return 1.0;
    if (n_classes > 9) throw std::invalid_argument("matched_accuracy: too many classes to enumerate");
    std::vector<std::size_t> perm(n_classes);
    std::iota(perm.begin(), perm.end(), 0);
    std::size_t best = 0;
    do {
        std::size_t hit = 0;
        for (std::size_t i = 0; i < truth.size(); ++i) hit += perm[inferred[i]] == truth[i];
        best = std::max(best, hit);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return static_cast<double>(best) / static_cast<double>(truth.size());
}

}  // namespace srcplan
