#pragma once

// Documents made of attributed sources, the schemata that label those
// sources, and the line-delimited JSON corpus format.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace srcplan {

using Tokens = std::vector<std::string>;

// Reserved token inserted between consecutive attributed sentences. It
// contains punctuation, so tokenize() can never produce it.
inline constexpr std::string_view kBoundaryToken = "<s>";

struct SourceRecord {
    std::string source_id;
    std::string name;
    std::vector<std::size_t> sentence_indices;  // strictly increasing
    // Optional per-sentence labels for sentence-level schemata, aligned
    // with sentence_indices.
    std::map<std::string, std::vector<std::string>> sentence_labels;

    bool operator==(const SourceRecord&) const = default;
};

struct Document {
    std::string id;
    std::string headline;
    std::vector<std::string> keywords;
    std::vector<std::string> sentences;
    std::vector<SourceRecord> sources;

    const SourceRecord* find_source(std::string_view source_id) const;
    bool operator==(const Document&) const = default;
};

struct SchemaDef {
    std::string name;
    std::vector<std::string> labels;

    std::size_t size() const { return labels.size(); }
    bool contains(std::string_view label) const;
    std::optional<std::size_t> index_of(std::string_view label) const;
    bool operator==(const SchemaDef&) const = default;
};

class SchemaRegistry {
public:
    // Throws DataError on duplicate names, k < 2, or repeated labels.
    void add(SchemaDef def);
    const SchemaDef* find(std::string_view name) const;
    const SchemaDef& at(std::string_view name) const;
    std::vector<std::string> names() const;
    const std::vector<SchemaDef>& schemata() const { return defs_; }
    bool empty() const { return defs_.empty(); }

    static SchemaRegistry from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

private:
    std::vector<SchemaDef> defs_;
};

// Stance and Role, the two schemata whose label sets are fully enumerated.
SchemaRegistry default_registry();
SchemaRegistry load_registry(const std::filesystem::path& path);
void save_registry(const SchemaRegistry& registry, const std::filesystem::path& path);

enum class Provenance { ingested, random_baseline, kmeans_baseline, noise_equalized, shuffled };

std::string_view to_string(Provenance p);
Provenance provenance_from_string(std::string_view s);

struct Labeling {
    std::string schema;
    std::map<std::string, std::string> assignments;  // source_id -> label
    Provenance provenance = Provenance::ingested;

    bool operator==(const Labeling&) const = default;
};

// One labeling per document, keyed by document id.
using LabelingSet = std::map<std::string, Labeling>;

enum class Split { train, eval };

std::string_view to_string(Split s);

struct Corpus {
    std::vector<Document> documents;
    std::map<std::pair<std::string, std::string>, Labeling> labelings;  // (doc id, schema)
    std::map<std::string, Split> split;

    const Document* find(std::string_view doc_id) const;
    const Labeling* labeling(std::string_view doc_id, std::string_view schema) const;
    Split split_of(const std::string& doc_id) const;
    std::vector<const Document*> documents_in(Split s) const;
    std::vector<std::string> schema_names() const;
    // Every ingested labeling of `schema`, keyed by document id.
    LabelingSet labelings_for(std::string_view schema) const;

    bool operator==(const Corpus&) const = default;
};

// Lowercases ASCII, splits on whitespace, and emits each ASCII punctuation
// character as its own token.
Tokens tokenize(std::string_view text);

// Tokens of the source's sentences in document order, with kBoundaryToken
// between sentences. Throws DataError for an unknown source.
Tokens attributed_text(const Document& doc, std::string_view source_id);

// Source ids ordered by attributed-sentence count, descending; ties keep
// document order. At most k.
std::vector<std::string> top_k_sources(const Document& doc, std::size_t k);

// Checks the document invariants. Throws DataError naming the document.
void validate_document(const Document& doc);
// Checks the corpus invariants, and label membership when a registry is given.
void validate_corpus(const Corpus& corpus, const SchemaRegistry* registry = nullptr);
void validate_labeling(const Document& doc, const Labeling& labeling, const SchemaDef* schema);

nlohmann::json document_to_json(const Corpus& corpus, const Document& doc);

// Reads the JSONL corpus. Parse errors carry the 1-based line number.
Corpus load_corpus(const std::filesystem::path& path, const SchemaRegistry* registry = nullptr);
Corpus parse_corpus(std::string_view text, const SchemaRegistry* registry = nullptr);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
std::string serialize_corpus(const Corpus& corpus);

// Baseline and derived labelings share one JSONL shape:
// {"doc_id", "schema", "provenance", "assignments": {source_id: label}}.
nlohmann::json labeling_to_json(const std::string& doc_id, const Labeling& labeling);
std::pair<std::string, Labeling> labeling_from_json(const nlohmann::json& j);
void save_labelings(const LabelingSet& set, const std::filesystem::path& path);
LabelingSet load_labelings(const std::filesystem::path& path);

// Keeps documents with at least `min_sources` sources, with their labelings.
Corpus filter_min_sources(const Corpus& corpus, std::size_t min_sources);

}  // namespace srcplan
