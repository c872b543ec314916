#pragma once

// Cross-schema analyses over per-document perplexities and joint source labels.

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "srcplan/corpus.hpp"

namespace srcplan {

// schema -> (doc id -> perplexity)
using PerplexityTables = std::map<std::string, std::map<std::string, double>>;

struct SelectionTable {
    std::map<std::string, std::string> per_document;  // doc id -> winning schema
    std::map<std::string, double> shares;             // schema -> fraction of documents
};

// Winner is the schema with the lowest perplexity; exact ties go to the
// lexicographically smaller name. Throws DataError unless every schema
// covers the same documents.
SelectionTable select_best_schema(const PerplexityTables& ppl);

struct KeywordScore {
    std::string keyword;
    double difference = 0.0;  // mean ppl under a - mean ppl under b
    std::size_t support = 0;
};

struct KeywordAffinity {
    std::vector<KeywordScore> favor_a;  // most negative first
    std::vector<KeywordScore> favor_b;  // most positive first
    std::vector<KeywordScore> all;      // every keyword meeting min_support, by keyword
};

// Keywords on fewer than min_support scored documents are dropped.
// Keywords enter favor_a only when difference < -min_abs_difference, favor_b
// only when difference > min_abs_difference.
KeywordAffinity keyword_affinity(const Corpus& corpus, const PerplexityTables& ppl, const std::string& schema_a,
                                 const std::string& schema_b, std::size_t top_n, std::size_t min_support = 5,
                                 double min_abs_difference = 0.0);

// Cramer's V of an r x c contingency table; rows and columns with zero
// marginals are dropped. Returns 0 when min(r, c) == 1.
double cramers_v_table(const std::vector<std::vector<double>>& table);
double cramers_v(std::span<const std::string> labels_a, std::span<const std::string> labels_b);

struct CramersMatrix {
    std::vector<std::string> schemata;
    std::vector<std::vector<double>> values;
    std::size_t n_sources = 0;  // sources labeled under every schema
};

CramersMatrix cramers_v_matrix(const Corpus& corpus, const std::vector<std::string>& schemata);

struct ImbalanceStats {
    std::size_t n_labels = 0;    // size of the label set
    std::size_t n_sources = 0;   // labeled sources counted
    double entropy_nats = 0.0;
    double majority_pct = 0.0;
    double minority_pct = 0.0;   // over the full label set, so may be 0
};

ImbalanceStats imbalance_from_labels(std::span<const std::string> labels, const SchemaDef& schema);
ImbalanceStats label_imbalance_stats(const Corpus& corpus, const SchemaDef& schema);

// argmax over labels of (share among the source's sentences) / prior.
// Ties go to the higher share, then the lexicographically smaller label.
std::string aggregate_source_label(std::span<const std::string> sentence_labels,
                                   const std::map<std::string, double>& prior);

// Corpus-wide sentence-label frequencies for a sentence-level schema.
std::map<std::string, double> sentence_label_prior(const Corpus& corpus, const std::string& schema);

// Source labels for a sentence-level schema, one labeling per document
// that carries sentence labels for it.
LabelingSet aggregate_sentence_labels(const Corpus& corpus, const std::string& schema,
                                      const std::map<std::string, double>& prior);

}  // namespace srcplan
