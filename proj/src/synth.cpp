#include "srcplan/synth.hpp"

#include <algorithm>
#include <fstream>

#include "srcplan/error.hpp"
#include "srcplan/rng.hpp"

namespace srcplan {

std::string_view to_string(SynthMode m) { return m == SynthMode::planted_schema ? "planted-schema" : "stm-story"; }

SynthMode synth_mode_from_string(std::string_view s) {
    if (s == "planted-schema") return SynthMode::planted_schema;
    if (s == "stm-story") return SynthMode::stm_story;
    throw UsageError("unknown synth mode '" + std::string(s) + "' (planted-schema|stm-story)");
}

std::vector<SchemaDef> SynthSpec::effective_schemata() const {
    if (!schemata.empty()) return schemata;
    return {{"Planted", {"alpha", "beta", "gamma", "delta"}}, {"Decoy", {"north", "south", "east", "west"}}};
}

void SynthSpec::validate() const {
    if (n_docs < 1) throw UsageError("synth: n_docs must be at least 1");
    if (sources_per_doc < 1) throw UsageError("synth: sources_per_doc must be at least 1");
    if (tokens_per_source < 1) throw UsageError("synth: tokens_per_source must be at least 1");
    if (sentence_len < 1) throw UsageError("synth: sentence_len must be at least 1");
    if (eval_every < 2) throw UsageError("synth: eval_every must be at least 2");
    if (!(separation >= 0.0 && separation <= 1.0)) throw UsageError("synth: separation must lie in [0, 1]");
    if (separation > 0.0 && private_block_size < 1)
        throw UsageError("synth: private vocabulary block too small for the requested labels");
    if (separation < 1.0 && shared_block_size < 1) throw UsageError("synth: shared vocabulary block is empty");
    if (mode == SynthMode::planted_schema) {
        SchemaRegistry reg;
        for (const auto& s : effective_schemata()) reg.add(s);
        if (!keyword_link && !reg.find(planted_schema))
            throw UsageError("synth: planted schema '" + planted_schema + "' is not among the schemata");
    } else {
        if (stm.n_doc_types < 1 || stm.n_source_types < 1 || stm.n_topics < 1)
            throw UsageError("synth: stm type and topic counts must be at least 1");
        if (!(type_concentration > 0.0 && type_concentration <= 1.0))
            throw UsageError("synth: type_concentration must lie in (0, 1]");
        if (private_block_size < 1) throw UsageError("synth: topic vocabulary blocks are empty");
    }
}

namespace {

std::string pad_id(char prefix, std::size_t i, std::size_t n) {
    std::string digits = std::to_string(i);
    const std::size_t width = std::to_string(n > 0 ? n - 1 : 0).size();
    return std::string(1, prefix) + std::string(width > digits.size() ? width - digits.size() : 0, '0') + digits;
}

std::string join(const std::vector<std::string>& toks) {
    std::string out;
    for (const auto& t : toks) {
        if (!out.empty()) out += ' ';
        out += t;
    }
    return out;
}

// One chunk of text owned by a source (index) or the background (-1).
struct Chunk {
    int owner;
    std::vector<std::string> tokens;
};

// Splits token streams into sentences, shuffles sentence order, and fills
// in the document's sentences and sources' indices.
void assemble(Document& doc, const std::vector<Chunk>& streams, std::size_t sentence_len, Rng& rng) {
    std::vector<Chunk> sentences;
    for (const auto& stream : streams) {
        for (std::size_t i = 0; i < stream.tokens.size(); i += sentence_len) {
            const std::size_t end = std::min(stream.tokens.size(), i + sentence_len);
            sentences.push_back({stream.owner, {stream.tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                                stream.tokens.begin() + static_cast<std::ptrdiff_t>(end)}});
        }
    }
    for (std::size_t i = sentences.size(); i > 1; --i) std::swap(sentences[i - 1], sentences[uniform_index(rng, i)]);
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        doc.sentences.push_back(join(sentences[i].tokens));
        if (sentences[i].owner >= 0) doc.sources[static_cast<std::size_t>(sentences[i].owner)].sentence_indices.push_back(i);
    }
}

std::string make_headline(std::vector<std::string> cues, std::size_t noise, Rng& rng) {
    std::vector<std::string> toks;
    for (std::size_t i = 0; i < noise; ++i) toks.push_back("hw" + std::to_string(uniform_index(rng, 30)));
    for (auto& c : cues) toks.insert(toks.begin() + static_cast<std::ptrdiff_t>(uniform_index(rng, toks.size() + 1)), std::move(c));
    return join(toks);
}

std::vector<std::string> random_keywords(Rng& rng) {
    std::vector<std::string> kws;
    while (kws.size() < 2) {
        std::string k = "kw" + std::to_string(uniform_index(rng, 20));
        if (std::find(kws.begin(), kws.end(), k) == kws.end()) kws.push_back(std::move(k));
    }
    return kws;
}

// Categorical with `conc` on `home` and the rest spread evenly.
std::vector<double> home_distribution(std::size_t n, std::size_t home, double conc) {
    if (n == 1) return {1.0};
    std::vector<double> p(n, (1.0 - conc) / static_cast<double>(n - 1));
    p[home] = conc;
    return p;
}

SynthResult generate_planted(const SynthSpec& spec) {
    const auto schemata = spec.effective_schemata();
    SynthResult r;
    for (const auto& s : schemata) r.registry.add(s);
    Rng rng(spec.seed);

    std::size_t fixed_planted = 0;
    for (std::size_t i = 0; i < schemata.size(); ++i)
        if (schemata[i].name == spec.planted_schema) fixed_planted = i;

    auto emit = [&](std::size_t schema_idx, std::size_t label_idx) {
        if (uniform01(rng) < spec.separation)
            return "s" + std::to_string(schema_idx) + "l" + std::to_string(label_idx) + "w" +
                   std::to_string(uniform_index(rng, spec.private_block_size));
        return "sh" + std::to_string(uniform_index(rng, spec.shared_block_size));
    };

    nlohmann::json docs = nlohmann::json::array();
    for (std::size_t d = 0; d < spec.n_docs; ++d) {
        Document doc;
        doc.id = pad_id('d', d, spec.n_docs);
        const std::size_t planted = spec.keyword_link ? uniform_index(rng, schemata.size()) : fixed_planted;
        const SchemaDef& ps = schemata[planted];
        const std::size_t shared_label = uniform_index(rng, ps.size());

        std::vector<std::vector<std::size_t>> labels(schemata.size());  // per schema, per source
        for (std::size_t s = 0; s < schemata.size(); ++s)
            for (std::size_t q = 0; q < spec.sources_per_doc; ++q)
                labels[s].push_back(s == planted && spec.label_mode == LabelMode::document_shared
                                        ? shared_label
                                        : uniform_index(rng, schemata[s].size()));

        std::vector<Chunk> streams;
        for (std::size_t q = 0; q < spec.sources_per_doc; ++q) {
            SourceRecord src;
            src.source_id = pad_id('s', q, spec.sources_per_doc);
            src.name = "Source " + std::to_string(q);
            doc.sources.push_back(std::move(src));
            Chunk c{static_cast<int>(q), {}};
            for (std::size_t t = 0; t < spec.tokens_per_source; ++t) c.tokens.push_back(emit(planted, labels[planted][q]));
            streams.push_back(std::move(c));
        }
        if (spec.background_tokens > 0) {
            Chunk bg{-1, {}};
            for (std::size_t t = 0; t < spec.background_tokens; ++t)
                bg.tokens.push_back("bg" + std::to_string(uniform_index(rng, spec.shared_block_size)));
            streams.push_back(std::move(bg));
        }
        assemble(doc, streams, spec.sentence_len, rng);

        std::vector<std::string> cues;
        if (spec.keyword_link) cues.push_back("schemacue" + std::to_string(planted));
        if (spec.label_cue) cues.push_back("labelcue" + std::to_string(shared_label));
        doc.headline = make_headline(std::move(cues), spec.headline_noise_tokens, rng);
        doc.keywords = random_keywords(rng);
        if (spec.keyword_link) doc.keywords.push_back("topic" + std::to_string(planted));

        nlohmann::json truth_labels = nlohmann::json::object();
        for (std::size_t s = 0; s < schemata.size(); ++s) {
            Labeling lab;
            lab.schema = schemata[s].name;
            for (std::size_t q = 0; q < spec.sources_per_doc; ++q)
                lab.assignments[doc.sources[q].source_id] = schemata[s].labels[labels[s][q]];
            if (s == planted) truth_labels = lab.assignments;
            r.corpus.labelings.emplace(std::make_pair(doc.id, lab.schema), std::move(lab));
        }
        docs.push_back({{"doc_id", doc.id}, {"planted_schema", ps.name}, {"labels", truth_labels}});
        r.corpus.split[doc.id] = d % spec.eval_every == spec.eval_every - 1 ? Split::eval : Split::train;
        r.corpus.documents.push_back(std::move(doc));
    }
    r.ground_truth = {{"mode", "planted-schema"},
                      {"seed", spec.seed},
                      {"separation", spec.separation},
                      {"keyword_link", spec.keyword_link},
                      {"documents", std::move(docs)}};
    return r;
}

SynthResult generate_story(const SynthSpec& spec) {
    const std::size_t T = spec.stm.n_doc_types, S = spec.stm.n_source_types, K = spec.stm.n_topics;
    const double conc = spec.type_concentration;
    std::vector<std::vector<double>> p_s(T), p_z_source(S), p_z_background(T), phi(K);
    for (std::size_t t = 0; t < T; ++t) p_s[t] = home_distribution(S, t % S, conc);
    for (std::size_t s = 0; s < S; ++s) p_z_source[s] = home_distribution(K, s % K, conc);
    for (std::size_t t = 0; t < T; ++t) p_z_background[t] = home_distribution(K, (S + t) % K, conc);

    std::vector<std::string> vocab;
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t j = 0; j < spec.private_block_size; ++j)
            vocab.push_back("t" + std::to_string(k) + "w" + std::to_string(j));
    const double V = static_cast<double>(vocab.size()), B = static_cast<double>(spec.private_block_size);
    for (std::size_t k = 0; k < K; ++k) {
        phi[k].assign(vocab.size(), (1.0 - spec.separation) / V);
        for (std::size_t j = 0; j < spec.private_block_size; ++j)
            phi[k][k * spec.private_block_size + j] += spec.separation / B;
    }

    SynthResult r;
    Rng rng(spec.seed);
    auto word = [&](std::size_t k) { return vocab[sample_discrete(rng, phi[k])]; };
    nlohmann::json docs = nlohmann::json::array();
    for (std::size_t d = 0; d < spec.n_docs; ++d) {
        Document doc;
        doc.id = pad_id('d', d, spec.n_docs);
        const std::size_t t = uniform_index(rng, T);
        std::vector<Chunk> streams;
        nlohmann::json source_types = nlohmann::json::object();
        for (std::size_t q = 0; q < spec.sources_per_doc; ++q) {
            SourceRecord src;
            src.source_id = pad_id('s', q, spec.sources_per_doc);
            src.name = "Source " + std::to_string(q);
            const std::size_t s = sample_discrete(rng, p_s[t]);
            source_types[src.source_id] = s;
            doc.sources.push_back(std::move(src));
            Chunk c{static_cast<int>(q), {}};
            for (std::size_t i = 0; i < spec.tokens_per_source; ++i)
                c.tokens.push_back(word(sample_discrete(rng, p_z_source[s])));
            streams.push_back(std::move(c));
        }
        Chunk bg{-1, {}};
        for (std::size_t i = 0; i < spec.background_tokens; ++i)
            bg.tokens.push_back(word(sample_discrete(rng, p_z_background[t])));
        if (!bg.tokens.empty()) streams.push_back(std::move(bg));
        assemble(doc, streams, spec.sentence_len, rng);
        doc.headline = make_headline({}, spec.headline_noise_tokens, rng);
        doc.keywords = random_keywords(rng);
        docs.push_back({{"doc_id", doc.id}, {"doc_type", t}, {"source_types", source_types}});
        r.corpus.split[doc.id] = d % spec.eval_every == spec.eval_every - 1 ? Split::eval : Split::train;
        r.corpus.documents.push_back(std::move(doc));
    }
    r.ground_truth = {{"mode", "stm-story"},
                      {"seed", spec.seed},
                      {"params",
                       {{"p_doc_type", std::vector<double>(T, 1.0 / static_cast<double>(T))},
                        {"p_source_type", p_s},
                        {"p_topic_source", p_z_source},
                        {"p_topic_background", p_z_background},
                        {"vocab", vocab},
                        {"phi", phi}}},
                      {"documents", std::move(docs)}};
    return r;
}

}  // namespace

SynthResult generate_corpus(const SynthSpec& spec) {
    spec.validate();
    return spec.mode == SynthMode::planted_schema ? generate_planted(spec) : generate_story(spec);
}

std::map<std::string, std::string> planted_schema_by_doc(const nlohmann::json& ground_truth) {
    std::map<std::string, std::string> out;
    for (const auto& d : ground_truth.at("documents"))
        out.emplace(d.at("doc_id").get<std::string>(), d.at("planted_schema").get<std::string>());
    return out;
}

void save_ground_truth(const nlohmann::json& truth, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << truth.dump(1) << '\n';
}

}  // namespace srcplan
