#include "srcplan/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "srcplan/error.hpp"

namespace srcplan {

using nlohmann::json;

const SourceRecord* Document::find_source(std::string_view source_id) const {
    for (const auto& s : sources)
        if (s.source_id == source_id) return &s;
    return nullptr;
}

bool SchemaDef::contains(std::string_view label) const {
    return index_of(label).has_value();
}

std::optional<std::size_t> SchemaDef::index_of(std::string_view label) const {
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == label) return i;
    return std::nullopt;
}

void SchemaRegistry::add(SchemaDef def) {
    if (def.name.empty()) throw DataError("schema with empty name");
    if (find(def.name)) throw DataError("duplicate schema '" + def.name + "'");
    if (def.labels.size() < 2)
        throw DataError("schema '" + def.name + "' needs at least 2 labels");
    std::set<std::string> seen(def.labels.begin(), def.labels.end());
    if (seen.size() != def.labels.size())
        throw DataError("schema '" + def.name + "' has repeated labels");
    defs_.push_back(std::move(def));
}

const SchemaDef* SchemaRegistry::find(std::string_view name) const {
    for (const auto& d : defs_)
        if (d.name == name) return &d;
    return nullptr;
}

const SchemaDef& SchemaRegistry::at(std::string_view name) const {
    if (auto* d = find(name)) return *d;
    throw DataError("unknown schema '" + std::string(name) + "'");
}

std::vector<std::string> SchemaRegistry::names() const {
    std::vector<std::string> out;
    for (const auto& d : defs_) out.push_back(d.name);
    return out;
}

SchemaRegistry SchemaRegistry::from_json(const json& j) {
    if (!j.is_object()) throw DataError("schema registry must be a JSON object");
    SchemaRegistry reg;
    // nlohmann::json orders keys lexicographically; registry order follows.
    for (const auto& [name, labels] : j.items()) {
        if (!labels.is_array()) throw DataError("schema '" + name + "': labels must be an array");
        SchemaDef def{name, {}};
        for (const auto& l : labels) def.labels.push_back(l.get<std::string>());
        reg.add(std::move(def));
    }
    return reg;
}

json SchemaRegistry::to_json() const {
    json j = json::object();
    for (const auto& d : defs_) j[d.name] = d.labels;
    return j;
}

SchemaRegistry default_registry() {
    SchemaRegistry reg;
    reg.add({"Role", {"Participant", "Representative", "Informational", "Other"}});
    reg.add({"Stance", {"Neutral", "Affirm", "Discuss", "Refute"}});
    return reg;
}

SchemaRegistry load_registry(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open schema registry " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("schema registry " + path.string() + ": " + e.what());
    }
    return SchemaRegistry::from_json(j);
}

void save_registry(const SchemaRegistry& registry, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << registry.to_json().dump(2) << '\n';
}

std::string_view to_string(Provenance p) {
    switch (p) {
        case Provenance::ingested: return "ingested";
        case Provenance::random_baseline: return "random-baseline";
        case Provenance::kmeans_baseline: return "kmeans-baseline";
        case Provenance::noise_equalized: return "noise-equalized";
        case Provenance::shuffled: return "shuffled";
    }
    return "ingested";
}

Provenance provenance_from_string(std::string_view s) {
    for (auto p : {Provenance::ingested, Provenance::random_baseline, Provenance::kmeans_baseline,
                   Provenance::noise_equalized, Provenance::shuffled})
        if (to_string(p) == s) return p;
    throw DataError("unknown provenance '" + std::string(s) + "'");
}

std::string_view to_string(Split s) {
    return s == Split::train ? "train" : "eval";
}

const Document* Corpus::find(std::string_view doc_id) const {
    for (const auto& d : documents)
        if (d.id == doc_id) return &d;
    return nullptr;
}

const Labeling* Corpus::labeling(std::string_view doc_id, std::string_view schema) const {
    auto it = labelings.find({std::string(doc_id), std::string(schema)});
    return it == labelings.end() ? nullptr : &it->second;
}

Split Corpus::split_of(const std::string& doc_id) const {
    auto it = split.find(doc_id);
    if (it == split.end()) throw DataError("document '" + doc_id + "' has no split");
    return it->second;
}

std::vector<const Document*> Corpus::documents_in(Split s) const {
    std::vector<const Document*> out;
    for (const auto& d : documents)
        if (split_of(d.id) == s) out.push_back(&d);
    return out;
}

std::vector<std::string> Corpus::schema_names() const {
    std::set<std::string> names;
    for (const auto& [key, _] : labelings) names.insert(key.second);
    return {names.begin(), names.end()};
}

LabelingSet Corpus::labelings_for(std::string_view schema) const {
    LabelingSet out;
    for (const auto& [key, lab] : labelings)
        if (key.second == schema) out.emplace(key.first, lab);
    return out;
}

namespace {

bool is_ascii_punct(unsigned char c) {
    return c < 128 && std::ispunct(c);
}

}  // namespace

Tokens tokenize(std::string_view text) {
    Tokens out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) out.push_back(std::move(cur));
        cur.clear();
    };
    for (char ch : text) {
        auto c = static_cast<unsigned char>(ch);
        if (c < 128 && std::isspace(c)) {
            flush();
        } else if (is_ascii_punct(c)) {
            flush();
            out.emplace_back(1, ch);
        } else {
            cur.push_back(c < 128 ? static_cast<char>(std::tolower(c)) : ch);
        }
    }
    flush();
    return out;
}

Tokens attributed_text(const Document& doc, std::string_view source_id) {
    const SourceRecord* src = doc.find_source(source_id);
    if (!src)
        throw DataError("document '" + doc.id + "': unknown source '" + std::string(source_id) + "'");
    Tokens out;
    bool first = true;
    for (std::size_t idx : src->sentence_indices) {
        if (!first) out.emplace_back(kBoundaryToken);
        first = false;
        auto toks = tokenize(doc.sentences.at(idx));
        out.insert(out.end(), std::make_move_iterator(toks.begin()), std::make_move_iterator(toks.end()));
    }
    return out;
}

std::vector<std::string> top_k_sources(const Document& doc, std::size_t k) {
    std::vector<std::size_t> order(doc.sources.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return doc.sources[a].sentence_indices.size() > doc.sources[b].sentence_indices.size();
    });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < order.size() && i < k; ++i) out.push_back(doc.sources[order[i]].source_id);
    return out;
}

void validate_document(const Document& doc) {
    auto fail = [&](const std::string& rule) {
        throw DataError("document '" + doc.id + "': " + rule);
    };
    if (doc.id.empty()) throw DataError("document with empty id");
    std::set<std::string> ids;
    std::vector<int> owner(doc.sentences.size(), -1);
    for (std::size_t si = 0; si < doc.sources.size(); ++si) {
        const auto& s = doc.sources[si];
        if (s.source_id.empty()) fail("source with empty source_id");
        if (!ids.insert(s.source_id).second) fail("duplicate source_id '" + s.source_id + "'");
        if (s.sentence_indices.empty()) fail("source '" + s.source_id + "' claims no sentences");
        for (std::size_t i = 0; i < s.sentence_indices.size(); ++i) {
            std::size_t idx = s.sentence_indices[i];
            if (idx >= doc.sentences.size())
                fail("source '" + s.source_id + "' references sentence " + std::to_string(idx) +
                     " of a " + std::to_string(doc.sentences.size()) + "-sentence document");
            if (i > 0 && idx <= s.sentence_indices[i - 1])
                fail("source '" + s.source_id + "' sentence_indices not strictly increasing");
            if (owner[idx] >= 0)
                fail("sentence " + std::to_string(idx) + " claimed by both '" +
                     doc.sources[owner[idx]].source_id + "' and '" + s.source_id + "'");
            owner[idx] = static_cast<int>(si);
        }
        for (const auto& [schema, labels] : s.sentence_labels)
            if (labels.size() != s.sentence_indices.size())
                fail("source '" + s.source_id + "' sentence_labels for '" + schema +
                     "' has wrong length");
    }
}

void validate_labeling(const Document& doc, const Labeling& labeling, const SchemaDef* schema) {
    for (const auto& [sid, label] : labeling.assignments) {
        if (!doc.find_source(sid))
            throw DataError("document '" + doc.id + "': labeling '" + labeling.schema +
                            "' names unknown source '" + sid + "'");
        if (schema && !schema->contains(label))
            throw DataError("document '" + doc.id + "': label '" + label + "' not in schema '" +
                            schema->name + "'");
    }
}

void validate_corpus(const Corpus& corpus, const SchemaRegistry* registry) {
    std::set<std::string> ids;
    for (const auto& d : corpus.documents) {
        validate_document(d);
        if (!ids.insert(d.id).second) throw DataError("duplicate document id '" + d.id + "'");
        if (!corpus.split.contains(d.id)) throw DataError("document '" + d.id + "' has no split");
    }
    if (corpus.split.size() != corpus.documents.size())
        throw DataError("split map names documents not in the corpus");
    for (const auto& [key, lab] : corpus.labelings) {
        const Document* d = corpus.find(key.first);
        if (!d) throw DataError("labeling for unknown document '" + key.first + "'");
        const SchemaDef* schema = registry ? registry->find(key.second) : nullptr;
        if (registry && !schema)
            throw DataError("document '" + key.first + "': schema '" + key.second + "' not registered");
        validate_labeling(*d, lab, schema);
    }
}

json document_to_json(const Corpus& corpus, const Document& doc) {
    json j;
    j["id"] = doc.id;
    j["headline"] = doc.headline;
    j["keywords"] = doc.keywords;
    j["sentences"] = doc.sentences;
    json sources = json::array();
    for (const auto& s : doc.sources) {
        json js;
        js["source_id"] = s.source_id;
        js["name"] = s.name;
        js["sentence_indices"] = s.sentence_indices;
        if (!s.sentence_labels.empty()) js["sentence_labels"] = s.sentence_labels;
        sources.push_back(std::move(js));
    }
    j["sources"] = std::move(sources);
    json labels = json::object();
    for (const auto& [key, lab] : corpus.labelings)
        if (key.first == doc.id) labels[key.second] = lab.assignments;
    j["labels"] = std::move(labels);
    j["split"] = std::string(to_string(corpus.split_of(doc.id)));
    return j;
}

namespace {

void ingest_record(Corpus& corpus, const json& j) {
    if (!j.is_object()) throw DataError("record is not a JSON object");
    Document doc;
    doc.id = j.at("id").get<std::string>();
    doc.headline = j.value("headline", std::string{});
    if (j.contains("keywords")) doc.keywords = j.at("keywords").get<std::vector<std::string>>();
    doc.sentences = j.at("sentences").get<std::vector<std::string>>();
    for (const auto& js : j.value("sources", json::array())) {
        SourceRecord s;
        s.source_id = js.at("source_id").get<std::string>();
        s.name = js.value("name", std::string{});
        for (const auto& v : js.at("sentence_indices")) {
            if (!v.is_number_integer() || v.get<long long>() < 0)
                throw DataError("document '" + doc.id + "': negative or non-integer sentence index");
            s.sentence_indices.push_back(v.get<std::size_t>());
        }
        if (js.contains("sentence_labels") && !js.at("sentence_labels").is_null())
            s.sentence_labels =
                js.at("sentence_labels").get<std::map<std::string, std::vector<std::string>>>();
        doc.sources.push_back(std::move(s));
    }
    std::string split = j.value("split", std::string("train"));
    if (split != "train" && split != "eval")
        throw DataError("document '" + doc.id + "': split must be train or eval");
    if (j.contains("labels")) {
        for (const auto& [schema, assignments] : j.at("labels").items()) {
            Labeling lab;
            lab.schema = schema;
            lab.assignments = assignments.get<std::map<std::string, std::string>>();
            corpus.labelings.emplace(std::make_pair(doc.id, schema), std::move(lab));
        }
    }
    if (corpus.split.contains(doc.id)) throw DataError("duplicate document id '" + doc.id + "'");
    corpus.split[doc.id] = split == "train" ? Split::train : Split::eval;
    corpus.documents.push_back(std::move(doc));
}

}  // namespace

Corpus parse_corpus(std::string_view text, const SchemaRegistry* registry) {
    Corpus corpus;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            ingest_record(corpus, json::parse(line));
        } catch (const json::exception& e) {
            throw DataError("line " + std::to_string(lineno) + ": " + e.what());
        } catch (const DataError& e) {
            throw DataError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    validate_corpus(corpus, registry);
    return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, const SchemaRegistry* registry) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open corpus " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_corpus(buf.str(), registry);
}

std::string serialize_corpus(const Corpus& corpus) {
    std::string out;
    for (const auto& d : corpus.documents) {
        out += document_to_json(corpus, d).dump();
        out += '\n';
    }
    return out;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << serialize_corpus(corpus);
}

json labeling_to_json(const std::string& doc_id, const Labeling& labeling) {
    return json{{"doc_id", doc_id},
                {"schema", labeling.schema},
                {"provenance", std::string(to_string(labeling.provenance))},
                {"assignments", labeling.assignments}};
}

std::pair<std::string, Labeling> labeling_from_json(const json& j) {
    Labeling lab;
    lab.schema = j.at("schema").get<std::string>();
    lab.provenance = provenance_from_string(j.value("provenance", std::string("ingested")));
    lab.assignments = j.at("assignments").get<std::map<std::string, std::string>>();
    return {j.at("doc_id").get<std::string>(), std::move(lab)};
}

void save_labelings(const LabelingSet& set, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    for (const auto& [doc_id, lab] : set) out << labeling_to_json(doc_id, lab).dump() << '\n';
}

LabelingSet load_labelings(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open labelings " + path.string());
    LabelingSet out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.insert(labeling_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw DataError(path.string() + " line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

Corpus filter_min_sources(const Corpus& corpus, std::size_t min_sources) {
    Corpus out;
    for (const auto& d : corpus.documents) {
        if (d.sources.size() < min_sources) continue;
        out.documents.push_back(d);
        out.split[d.id] = corpus.split_of(d.id);
    }
    for (const auto& [key, lab] : corpus.labelings)
        if (out.split.contains(key.first)) out.labelings.emplace(key, lab);
    return out;
}

}  // namespace srcplan
