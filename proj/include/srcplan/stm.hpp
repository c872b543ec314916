#pragma once

// Source topic model. Each document has a type T; each of its sources has a
// source type S drawn given T; every word has a topic z drawn given S (for
// words attributed to a source) or given T (background words), and the word
// is drawn from its topic. The source/background switch is observed from
// attribution. All Dirichlet parameters are collapsed out and the
// assignments are resampled by systematic-scan Gibbs.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "srcplan/corpus.hpp"
#include "srcplan/rng.hpp"

namespace srcplan {

struct StmConfig {
    std::size_t n_doc_types = 3;
    std::size_t n_source_types = 3;
    std::size_t n_topics = 6;
    double h_T = 1.0;
    double h_S = 1.0;
    double h_z = 1.0;
    double h_w = 0.1;
    std::size_t sweeps = 500;
    std::size_t burn_in = 100;
    std::size_t thin = 1;
    bool store_word_topics = true;
    std::uint64_t seed = 0;

    // Throws UsageError on zero sizes, non-positive priors, or burn_in >= sweeps.
    // A zero-sweep run is allowed and returns the initial state.
    void validate() const;
};

// Per document, per token (tokens of all sentences in order): the index of
// the owning source, or kBackground.
struct SwitchMask {
    static constexpr int kBackground = -1;
    struct DocMask {
        std::string doc_id;
        std::vector<int> owner;
    };
    std::vector<DocMask> docs;
};

SwitchMask build_switch_mask(const Corpus& corpus);

// Dense count table.
class CountMatrix {
public:
    CountMatrix() = default;
    CountMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0) {}
    std::int64_t& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    std::int64_t operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool operator==(const CountMatrix&) const = default;

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<std::int64_t> data_;
};

class GibbsState {
public:
    // Uniform random assignments from cfg.seed. Throws DataError when the
    // mask disagrees with the corpus attribution.
    static GibbsState init(const Corpus& corpus, const SwitchMask& mask, const StmConfig& cfg);

    // Unnormalized log conditional of each candidate value, with the
    // variable's own contributions removed from every count.
    std::vector<double> doc_type_log_weights(std::size_t doc) const;
    std::vector<double> source_type_log_weights(std::size_t doc, std::size_t source) const;
    std::vector<double> word_topic_log_weights(std::size_t doc, std::size_t position) const;

    void sample_doc_type(std::size_t doc);
    void sample_source_type(std::size_t doc, std::size_t source);
    void sample_word_topic(std::size_t doc, std::size_t position);
    // All doc types, then all source types, then all word topics.
    void sweep();

    // Replaces every assignment and rebuilds the counts.
    void set_assignments(std::vector<std::size_t> doc_types, std::vector<std::vector<std::size_t>> source_types,
                         std::vector<std::vector<std::size_t>> word_topics);

    // Collapsed log joint of assignments and words.
    double log_joint() const;

    // Throws std::logic_error when the incremental counts differ from a
    // recount of the assignments.
    void audit() const;

    std::size_t n_docs() const { return doc_ids_.size(); }
    std::size_t n_sources(std::size_t doc) const { return source_type_[doc].size(); }
    std::size_t n_tokens(std::size_t doc) const { return words_[doc].size(); }
    std::size_t vocab_size() const { return vocab_.size(); }
    const std::vector<std::string>& vocab() const { return vocab_; }
    const std::string& doc_id(std::size_t doc) const { return doc_ids_[doc]; }
    const std::string& source_id(std::size_t doc, std::size_t source) const { return source_ids_[doc][source]; }
    std::size_t word(std::size_t doc, std::size_t position) const { return words_[doc][position]; }
    int owner(std::size_t doc, std::size_t position) const { return owner_[doc][position]; }

    std::size_t doc_type(std::size_t doc) const { return doc_type_[doc]; }
    std::size_t source_type(std::size_t doc, std::size_t source) const { return source_type_[doc][source]; }
    std::size_t word_topic(std::size_t doc, std::size_t position) const { return word_topic_[doc][position]; }
    const std::vector<std::size_t>& doc_types() const { return doc_type_; }
    const std::vector<std::vector<std::size_t>>& source_types() const { return source_type_; }
    const std::vector<std::vector<std::size_t>>& word_topics() const { return word_topic_; }
    const StmConfig& config() const { return cfg_; }

    // Count tensors: documents per type, sources per (doc type, source type),
    // source-word topics per source type, background topics per doc type,
    // words per topic, tokens per topic.
    const std::vector<std::int64_t>& c_T() const { return c_T_; }
    const CountMatrix& c_TS() const { return c_TS_; }
    const CountMatrix& c_Sz() const { return c_Sz_; }
    const CountMatrix& c_Tz() const { return c_Tz_; }
    const CountMatrix& c_zw() const { return c_zw_; }
    const std::vector<std::int64_t>& c_z() const { return c_z_; }

private:
    void rebuild_counts();
    void add_doc_type(std::size_t doc, std::size_t t, int delta);
    void add_source_type(std::size_t doc, std::size_t source, std::size_t s, int delta);
    void add_word_topic(std::size_t doc, std::size_t position, std::size_t k, int delta);

    StmConfig cfg_;
    std::vector<std::string> vocab_;
    std::vector<std::string> doc_ids_;
    std::vector<std::vector<std::string>> source_ids_;
    std::vector<std::vector<std::size_t>> words_;
    std::vector<std::vector<int>> owner_;
    // Token positions owned by each source, and background positions.
    std::vector<std::vector<std::vector<std::size_t>>> source_positions_;
    std::vector<std::vector<std::size_t>> background_positions_;

    std::vector<std::size_t> doc_type_;
    std::vector<std::vector<std::size_t>> source_type_;
    std::vector<std::vector<std::size_t>> word_topic_;

    std::vector<std::int64_t> c_T_;
    CountMatrix c_TS_;
    std::vector<std::int64_t> c_TS_sum_;
    CountMatrix c_Sz_;
    std::vector<std::int64_t> c_Sz_sum_;
    CountMatrix c_Tz_;
    std::vector<std::int64_t> c_Tz_sum_;
    CountMatrix c_zw_;
    std::vector<std::int64_t> c_z_;

    Rng rng_;
    std::vector<double> scratch_;
};

struct GibbsSample {
    std::size_t sweep = 0;
    std::vector<std::size_t> doc_types;
    std::vector<std::vector<std::size_t>> source_types;
    std::vector<std::vector<std::size_t>> word_topics;  // empty unless stored
    double log_joint = 0.0;
};

struct GibbsRun {
    GibbsState state;
    std::vector<GibbsSample> samples;
};

// Runs cfg.sweeps sweeps; keeps a snapshot after every cfg.thin-th sweep past burn-in.
GibbsRun run_gibbs(const Corpus& corpus, const SwitchMask& mask, const StmConfig& cfg);

// JSON lines: sweep, doc_type {doc: type}, source_type {doc: {source: type}}, log_joint.
void write_chain_jsonl(const GibbsState& state, std::span<const GibbsSample> samples,
                       const std::filesystem::path& path);

// Accuracy under the best one-to-one relabeling of inferred classes
// (exhaustive over permutations; n_classes <= 9).
double matched_accuracy(std::span<const std::size_t> truth, std::span<const std::size_t> inferred,
                        std::size_t n_classes);

}  // namespace srcplan
