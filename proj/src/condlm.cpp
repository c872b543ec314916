#include "srcplan/condlm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "srcplan/error.hpp"

namespace srcplan {

using nlohmann::json;

std::size_t ConditionalNGram::ContextHash::operator()(const Context& c) const noexcept {
    std::size_t h = 0x9e3779b97f4a7c15ULL ^ c.size();
    for (TokenId t : c) h ^= t + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
}

std::vector<LabeledSequence> labeled_sequences(const Document& doc, const Labeling& labeling) {
    std::vector<LabeledSequence> out;
    for (const auto& src : doc.sources) {
        auto it = labeling.assignments.find(src.source_id);
        if (it == labeling.assignments.end())
            throw DataError("document '" + doc.id + "': source '" + src.source_id +
                            "' has no label under '" + labeling.schema + "'");
        out.push_back({src.source_id, it->second, attributed_text(doc, src.source_id)});
    }
    return out;
}

ConditionalNGram ConditionalNGram::train(const Corpus& corpus, const SchemaDef& schema,
                                         const LabelingSet& labelings, const NGramParams& params) {
    std::vector<std::pair<std::string, Tokens>> seqs;
    for (const Document* doc : corpus.documents_in(Split::train)) {
        auto it = labelings.find(doc->id);
        if (it == labelings.end())
            throw DataError("train document '" + doc->id + "' has no labeling under '" + schema.name + "'");
        for (auto& ls : labeled_sequences(*doc, it->second)) {
            if (!schema.contains(ls.label))
                throw DataError("document '" + doc->id + "': label '" + ls.label +
                                "' not in schema '" + schema.name + "'");
            seqs.emplace_back(std::move(ls.label), std::move(ls.tokens));
        }
    }
    return train_sequences(schema.name, seqs, params);
}

ConditionalNGram ConditionalNGram::train_sequences(
    std::string schema_name, const std::vector<std::pair<std::string, Tokens>>& sequences,
    const NGramParams& params) {
    if (params.order < 1) throw UsageError("n-gram order must be at least 1");
    if (!(params.alpha > 0.0)) throw UsageError("smoothing alpha must be positive");
    if (params.lambda < 0.0 || params.lambda > 1.0) throw UsageError("lambda must lie in [0, 1]");

    ConditionalNGram m;
    m.schema_ = std::move(schema_name);
    m.params_ = params;

    std::set<std::string> vocab;
    std::size_t n_tokens = 0;
    for (const auto& [_, toks] : sequences) {
        vocab.insert(toks.begin(), toks.end());
        n_tokens += toks.size();
    }
    if (n_tokens == 0) throw DataError("training split contains no attributed tokens");
    m.vocab_.assign(vocab.begin(), vocab.end());
    for (TokenId i = 0; i < m.vocab_.size(); ++i) m.ids_.emplace(m.vocab_[i], i);

    for (const auto& [label, toks] : sequences) {
        m.label_tables_.try_emplace(label);
        auto ids = m.encode(toks);
        m.add_sequence(label, ids);
    }
    return m;
}

void ConditionalNGram::add_sequence(const std::string& label, std::span<const TokenId> ids) {
    Table& lt = label_tables_[label];
    const std::size_t ctx_len = params_.order - 1;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        std::size_t start = i >= ctx_len ? i - ctx_len : 0;
        Context ctx(ids.begin() + start, ids.begin() + i);
        auto& lc = lt[ctx];
        ++lc.counts[ids[i]];
        ++lc.total;
        auto& gc = global_[ctx];
        ++gc.counts[ids[i]];
        ++gc.total;
    }
}

std::vector<ConditionalNGram::TokenId> ConditionalNGram::encode(std::span<const std::string> tokens) const {
    std::vector<TokenId> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) {
        auto it = ids_.find(t);
        out.push_back(it == ids_.end() ? unknown_id() : it->second);
    }
    return out;
}

double ConditionalNGram::smoothed(const Table* table, std::span<const TokenId> context,
                                  TokenId token) const {
    const double cells = static_cast<double>(smoothing_cells());
    double count = 0.0, total = 0.0;
    if (table) {
        auto it = table->find(Context(context.begin(), context.end()));
        if (it != table->end()) {
            total = static_cast<double>(it->second.total);
            auto ct = it->second.counts.find(token);
            if (ct != it->second.counts.end()) count = static_cast<double>(ct->second);
        }
    }
    return (count + params_.alpha) / (total + params_.alpha * cells);
}

double ConditionalNGram::token_logprob_ids(std::string_view label, std::span<const TokenId> context,
                                           TokenId token) const {
    const double lambda = params_.lambda;
    double p = 0.0;
    if (lambda > 0.0) p += lambda * smoothed(label_table(label), context, token);
    if (lambda < 1.0) p += (1.0 - lambda) * smoothed(&global_, context, token);
    return std::log(p);
}

double ConditionalNGram::token_logprob(std::string_view label, std::span<const std::string> context,
                                       std::string_view token) const {
    auto ctx = encode(context);
    std::size_t ctx_len = params_.order - 1;
    std::span<const TokenId> view(ctx);
    if (view.size() > ctx_len) view = view.subspan(view.size() - ctx_len);
    auto it = ids_.find(std::string(token));
    return token_logprob_ids(label, view, it == ids_.end() ? unknown_id() : it->second);
}

SequenceScore ConditionalNGram::sequence_logprob_ids(std::string_view label,
                                                     std::span<const TokenId> ids) const {
    if (ids.empty()) throw std::invalid_argument("sequence_logprob: empty sequence");
    SequenceScore s;
    s.per_token.reserve(ids.size());
    const std::size_t ctx_len = params_.order - 1;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        std::size_t start = i >= ctx_len ? i - ctx_len : 0;
        double lp = token_logprob_ids(label, ids.subspan(start, i - start), ids[i]);
        s.per_token.push_back(lp);
        s.total += lp;
    }
    return s;
}

SequenceScore ConditionalNGram::sequence_logprob(std::string_view label,
                                                 std::span<const std::string> tokens) const {
    auto ids = encode(tokens);
    return sequence_logprob_ids(label, ids);
}

std::vector<std::string> ConditionalNGram::labels() const {
    std::vector<std::string> out;
    for (const auto& [l, _] : label_tables_) out.push_back(l);
    return out;
}

const ConditionalNGram::Table* ConditionalNGram::label_table(std::string_view label) const {
    auto it = label_tables_.find(std::string(label));
    return it == label_tables_.end() ? nullptr : &it->second;
}

namespace {

constexpr int kFormatVersion = 1;

json table_to_json(const ConditionalNGram::Table& t) {
    // Sorted so identical models serialize identically.
    std::vector<const std::pair<const ConditionalNGram::Context, ConditionalNGram::ContextCounts>*> rows;
    for (const auto& row : t) rows.push_back(&row);
    std::sort(rows.begin(), rows.end(), [](auto* a, auto* b) { return a->first < b->first; });
    json out = json::array();
    for (auto* row : rows) {
        json counts = json::array();
        for (const auto& [tok, c] : row->second.counts) counts.push_back({tok, c});
        out.push_back({{"context", row->first}, {"counts", std::move(counts)}});
    }
    return out;
}

ConditionalNGram::Table table_from_json(const json& j) {
    ConditionalNGram::Table t;
    for (const auto& row : j) {
        auto& cc = t[row.at("context").get<ConditionalNGram::Context>()];
        for (const auto& pair : row.at("counts")) {
            auto tok = pair.at(0).get<ConditionalNGram::TokenId>();
            auto c = pair.at(1).get<std::uint64_t>();
            cc.counts[tok] = c;
            cc.total += c;
        }
    }
    return t;
}

}  // namespace

json ConditionalNGram::to_json() const {
    json labels = json::object();
    for (const auto& [l, t] : label_tables_) labels[l] = table_to_json(t);
    return json{{"format", "srcplan-condlm"},
                {"version", kFormatVersion},
                {"schema", schema_},
                {"order", params_.order},
                {"alpha", params_.alpha},
                {"lambda", params_.lambda},
                {"vocab", vocab_},
                {"global", table_to_json(global_)},
                {"labels", std::move(labels)}};
}

ConditionalNGram ConditionalNGram::from_json(const json& j) {
    if (j.value("format", std::string{}) != "srcplan-condlm")
        throw DataError("not a conditional n-gram model file");
    if (j.at("version").get<int>() != kFormatVersion)
        throw DataError("unsupported model version " + j.at("version").dump());
    ConditionalNGram m;
    m.schema_ = j.at("schema").get<std::string>();
    m.params_.order = j.at("order").get<std::size_t>();
    m.params_.alpha = j.at("alpha").get<double>();
    m.params_.lambda = j.at("lambda").get<double>();
    m.vocab_ = j.at("vocab").get<std::vector<std::string>>();
    for (TokenId i = 0; i < m.vocab_.size(); ++i) m.ids_.emplace(m.vocab_[i], i);
    m.global_ = table_from_json(j.at("global"));
    for (const auto& [l, t] : j.at("labels").items()) m.label_tables_[l] = table_from_json(t);
    return m;
}

void ConditionalNGram::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << to_json().dump() << '\n';
}

ConditionalNGram ConditionalNGram::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model " + path.string());
    try {
        return from_json(json::parse(in));
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

}  // namespace srcplan
