#pragma once

// Label-conditioned additive-smoothed n-gram model. Every token of a
// source's attributed text is scored under a distribution keyed by that
// source's label and the preceding order-1 tokens, interpolated with the
// same-context distribution pooled over all labels.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "srcplan/corpus.hpp"

namespace srcplan {

struct NGramParams {
    std::size_t order = 3;  // context length + 1
    double alpha = 0.1;     // additive smoothing mass per cell
    double lambda = 0.7;    // weight of the label-keyed distribution

    bool operator==(const NGramParams&) const = default;
};

struct SequenceScore {
    double total = 0.0;
    std::vector<double> per_token;
};

class ConditionalNGram {
public:
    using TokenId = std::uint32_t;
    using Context = std::vector<TokenId>;

    struct ContextCounts {
        std::map<TokenId, std::uint64_t> counts;
        std::uint64_t total = 0;
        bool operator==(const ContextCounts&) const = default;
    };

    struct ContextHash {
        std::size_t operator()(const Context& c) const noexcept;
    };
    using Table = std::unordered_map<Context, ContextCounts, ContextHash>;

    // Accumulates counts from train-split documents only. Throws DataError
    // when a train document lacks a labeling, a label is outside the schema,
    // or the training split is empty.
    static ConditionalNGram train(const Corpus& corpus, const SchemaDef& schema,
                                  const LabelingSet& labelings, const NGramParams& params);

    // Trains directly on (label, token sequence) pairs.
    static ConditionalNGram train_sequences(
        std::string schema_name, const std::vector<std::pair<std::string, Tokens>>& sequences,
        const NGramParams& params);

    double token_logprob(std::string_view label, std::span<const std::string> context,
                         std::string_view token) const;
    // Throws std::invalid_argument on an empty sequence.
    SequenceScore sequence_logprob(std::string_view label, std::span<const std::string> tokens) const;

    // Id-level scoring for callers that encode once and score many times.
    std::vector<TokenId> encode(std::span<const std::string> tokens) const;
    double token_logprob_ids(std::string_view label, std::span<const TokenId> context,
                             TokenId token) const;
    SequenceScore sequence_logprob_ids(std::string_view label, std::span<const TokenId> ids) const;

    const std::string& schema() const { return schema_; }
    const NGramParams& params() const { return params_; }
    const std::vector<std::string>& vocab() const { return vocab_; }
    TokenId unknown_id() const { return static_cast<TokenId>(vocab_.size()); }
    // Vocabulary plus the unknown cell.
    std::size_t smoothing_cells() const { return vocab_.size() + 1; }
    std::vector<std::string> labels() const;

    const Table* label_table(std::string_view label) const;
    const Table& global_table() const { return global_; }

    nlohmann::json to_json() const;
    static ConditionalNGram from_json(const nlohmann::json& j);
    void save(const std::filesystem::path& path) const;
    static ConditionalNGram load(const std::filesystem::path& path);

    bool operator==(const ConditionalNGram&) const = default;

private:
    double smoothed(const Table* table, std::span<const TokenId> context, TokenId token) const;
    void add_sequence(const std::string& label, std::span<const TokenId> ids);

    std::string schema_;
    NGramParams params_;
    std::vector<std::string> vocab_;
    std::unordered_map<std::string, TokenId> ids_;
    std::map<std::string, Table> label_tables_;
    Table global_;
};

// Sequences scored for one document: each source's attributed text with its label.
struct LabeledSequence {
    std::string source_id;
    std::string label;
    Tokens tokens;
};

// Throws DataError when a source lacks a label.
std::vector<LabeledSequence> labeled_sequences(const Document& doc, const Labeling& labeling);

}  // namespace srcplan
