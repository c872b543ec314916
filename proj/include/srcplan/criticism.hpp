#pragma once

// Schema criticism: conditional perplexity with negative prompting, and the
// posterior-predictive held-out-label task.

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "srcplan/condlm.hpp"
#include "srcplan/corpus.hpp"
#include "srcplan/logreg.hpp"

namespace srcplan {

struct NegPromptConfig {
    double gamma = 0.5;  // weight on the true labeling, in [0.5, 1]
    std::uint64_t shuffle_seed = 0;

    void validate() const;
};

// Permutes the labels across the labeling's sources. For two or more
// sources the permutation is never the identity, and among sampled
// permutations the first that changes the most sources' labels is kept
// (every label changes unless one label holds over half the sources).
Labeling shuffle_labels(const Labeling& labeling, std::uint64_t seed);

// exp(-mean_i s_i) with s_i = gamma * true_i - (1 - gamma) * shuffled_i.
double negprompt_perplexity(std::span<const double> true_logprobs,
                            std::span<const double> shuffled_logprobs, double gamma);

// Scores every attributed token of `doc` under `labeling` and under
// `shuffled`. Throws DataError when the document has no attributed tokens.
double conditional_perplexity(const ConditionalNGram& model, const Document& doc,
                              const Labeling& labeling, const Labeling& shuffled, double gamma);

// As above, with the shuffle drawn from cfg.shuffle_seed and the document id.
double conditional_perplexity(const ConditionalNGram& model, const Document& doc,
                              const Labeling& labeling, const NegPromptConfig& cfg);

// Per-document perplexity over one split. Documents without attributed
// tokens are skipped with a warning.
std::map<std::string, double> document_perplexities(const Corpus& corpus, const ConditionalNGram& model,
                                                    const LabelingSet& labelings,
                                                    const NegPromptConfig& cfg,
                                                    Split split = Split::eval);

// Out-of-fold perplexities for the train split: the train documents are
// dealt into `folds` groups by position, and each group is scored by a
// model trained on the other groups. In-sample scores would reward any
// labeling, since the model has memorized its label-specific n-grams.
std::map<std::string, double> crossfit_perplexities(const Corpus& corpus, const SchemaDef& schema,
                                                   const LabelingSet& labelings, const NGramParams& params,
                                                   const NegPromptConfig& cfg, std::size_t folds = 5);

struct PerplexityReport {
    std::string schema;
    std::map<std::string, double> per_document;
    double mean = 0.0;
    std::map<std::string, double> baseline_mean;
    std::map<std::string, double> delta_vs_baseline;  // schema mean - baseline mean
    std::map<std::string, double> t_test_p;           // Welch, two-sided
};

// Baseline labelings at a given label-set size k.
struct BaselineGenerator {
    std::string name;
    std::function<LabelingSet(const Corpus&, std::size_t k)> generate;
};

PerplexityReport make_perplexity_report(
    const std::string& schema, const std::map<std::string, double>& per_document,
    const std::map<std::string, std::map<std::string, double>>& baseline_per_document);

// Evaluates the schema on the eval split, and each baseline by training a
// model with the same hyperparameters on the baseline's labels at k =
// |schema|. Throws DataError for an empty eval split.
PerplexityReport schema_perplexity_report(const Corpus& corpus, const SchemaDef& schema,
                                          const ConditionalNGram& model, const LabelingSet& labelings,
                                          const std::vector<BaselineGenerator>& baselines,
                                          const NegPromptConfig& cfg);

// ---- posterior predictive -------------------------------------------------

// Feature layout: binary headline bag-of-words over the train-split
// headline vocabulary, then the count of each schema label among the
// non-held-out sources, then a one-hot of the held-out source's rank.
class PPFeaturizer {
public:
    PPFeaturizer() = default;
    PPFeaturizer(const Corpus& corpus, const SchemaDef& schema, std::size_t top_k);

    // Receives only the labels of the remaining sources; the held-out label
    // never reaches feature extraction.
    SparseVector features(std::string_view headline, std::span<const std::string> remaining_labels,
                          std::size_t held_out_rank) const;

    std::size_t n_features() const { return vocab_.size() + labels_.size() + top_k_; }
    const std::vector<std::string>& headline_vocab() const { return vocab_; }

private:
    std::vector<std::string> vocab_;
    std::map<std::string, std::size_t> vocab_index_;
    std::vector<std::string> labels_;
    std::size_t top_k_ = 0;
};

struct PPInstance {
    std::string doc_id;
    std::string held_out_source;
    std::size_t held_out_rank = 0;
    SparseVector features;
    std::string held_out_label;
};

struct PPInstanceSet {
    PPFeaturizer featurizer;
    std::vector<PPInstance> train;
    std::vector<PPInstance> eval;
};

PPInstanceSet build_pp_instances(const Corpus& corpus, const SchemaDef& schema,
                                 const LabelingSet& labelings, std::size_t top_k, std::uint64_t seed);

MultinomialLogReg train_pp_classifier(const PPInstanceSet& instances, const LogRegParams& params);

struct PosteriorPredictiveReport {
    std::string schema;
    double micro_f1 = 0.0;
    std::size_t n_eval = 0;
    std::vector<double> bootstrap_f1;
    std::map<std::string, double> baseline_f1;
    std::map<std::string, double> ratio_vs_baseline;
    std::map<std::string, double> bootstrap_p;
};

// Equal to accuracy: one prediction per instance.
double micro_f1(std::span<const std::string> predicted, std::span<const std::string> truth);

PosteriorPredictiveReport evaluate_pp_f1(const MultinomialLogReg& classifier,
                                         std::span<const PPInstance> eval, std::size_t bootstrap_n,
                                         std::uint64_t seed, std::string schema = {});

// Records F1 ratio and paired-bootstrap significance against a baseline
// evaluated with the same bootstrap seed.
void compare_pp(PosteriorPredictiveReport& report, const std::string& baseline_name,
                const PosteriorPredictiveReport& baseline);

}  // namespace srcplan
