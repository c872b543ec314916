#pragma once

// Headline-only prediction of the document's best-explaining schema.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "srcplan/analysis.hpp"
#include "srcplan/corpus.hpp"
#include "srcplan/logreg.hpp"

namespace srcplan {

// Binary bag-of-words over the headline vocabulary of the train split.
class HeadlineFeaturizer {
public:
    static HeadlineFeaturizer fit(const Corpus& corpus, std::size_t min_df = 1);

    SparseVector features(std::string_view headline) const;
    std::size_t size() const { return vocab_.size(); }
    const std::vector<std::string>& vocab() const { return vocab_; }

    nlohmann::json to_json() const;
    static HeadlineFeaturizer from_json(const nlohmann::json& j);

private:
    void index();
    std::vector<std::string> vocab_;
    std::map<std::string, std::size_t> index_;
};

// Document ids, sorted, with every present class cut down to the minority
// class's count by a seeded uniform subsample. Throws DataError for fewer
// than two classes.
std::vector<std::string> downsample_balance(const std::map<std::string, std::string>& winners,
                                            std::uint64_t seed);

struct SchemaPredictor {
    HeadlineFeaturizer featurizer;
    MultinomialLogReg classifier;

    std::vector<double> predict_proba(std::string_view headline) const;
    const std::string& predict(std::string_view headline) const;

    nlohmann::json to_json() const;
    static SchemaPredictor from_json(const nlohmann::json& j);
    void save(const std::filesystem::path& path) const;
    static SchemaPredictor load(const std::filesystem::path& path);
};

// Throws DataError when fewer than two classes are present.
MultinomialLogReg train_schema_predictor(std::span<const SparseVector> features,
                                         std::span<const std::string> winners, std::size_t n_features,
                                         const LogRegParams& params);

// Fits the featurizer on the train split and the classifier on the
// balanced subsample of train-split documents with a winner. Documents with
// empty headlines are skipped.
SchemaPredictor fit_schema_predictor(const Corpus& corpus, const std::map<std::string, std::string>& winners,
                                     std::size_t min_df, const LogRegParams& params, std::uint64_t seed);

// Rank-statistic AUC with midranks for ties. NaN without both classes.
double binary_auc(std::span<const double> scores, std::span<const bool> positive);

struct AucResult {
    double macro = 0.0;
    std::vector<double> per_class;  // NaN for skipped classes
    std::size_t n_scored_classes = 0;
};

// One-vs-rest per class, averaged over classes with at least one positive
// and one negative.
AucResult roc_auc(std::span<const std::vector<double>> scores, std::span<const std::size_t> truths,
                  std::size_t n_classes);

enum class EvalMode { balanced, natural };

std::string_view to_string(EvalMode m);
EvalMode eval_mode_from_string(std::string_view s);

struct PredictorReport {
    EvalMode mode = EvalMode::natural;
    std::size_t n = 0;
    double macro_auc = 0.0;
    double micro_f1 = 0.0;
    std::vector<std::string> classes;
    std::vector<double> per_class_auc;
};

// Scores eval-split documents with a winner; balanced mode first applies
// downsample_balance with `seed`.
PredictorReport evaluate_schema_predictor(const SchemaPredictor& predictor, const Corpus& corpus,
                                          const std::map<std::string, std::string>& winners, EvalMode mode,
                                          std::uint64_t seed);

}  // namespace srcplan
