#include "srcplan/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <set>

#include "srcplan/criticism.hpp"
#include "srcplan/error.hpp"
#include "srcplan/log.hpp"
#include "srcplan/rng.hpp"

namespace srcplan {

void HeadlineFeaturizer::index() {
    index_.clear();
    for (std::size_t i = 0; i < vocab_.size(); ++i) index_.emplace(vocab_[i], i);
}

HeadlineFeaturizer HeadlineFeaturizer::fit(const Corpus& corpus, std::size_t min_df) {
    std::map<std::string, std::size_t> df;
    for (const Document* doc : corpus.documents_in(Split::train)) {
        auto toks = tokenize(doc->headline);
        std::set<std::string> uniq(toks.begin(), toks.end());
        for (const auto& t : uniq) ++df[t];
    }
    HeadlineFeaturizer f;
    for (const auto& [t, c] : df)
        if (c >= min_df) f.vocab_.push_back(t);
    f.index();
    return f;
}

SparseVector HeadlineFeaturizer::features(std::string_view headline) const {
    std::set<std::size_t> hit;
    for (const auto& t : tokenize(headline)) {
        auto it = index_.find(t);
        if (it != index_.end()) hit.insert(it->second);
    }
    SparseVector v;
    for (std::size_t i : hit) v.emplace_back(i, 1.0);
    return v;
}

nlohmann::json HeadlineFeaturizer::to_json() const { return {{"vocab", vocab_}}; }

HeadlineFeaturizer HeadlineFeaturizer::from_json(const nlohmann::json& j) {
    HeadlineFeaturizer f;
    f.vocab_ = j.at("vocab").get<std::vector<std::string>>();
    f.index();
    return f;
}

std::vector<std::string> downsample_balance(const std::map<std::string, std::string>& winners,
                                            std::uint64_t seed) {
    std::map<std::string, std::vector<std::string>> by_class;
    for (const auto& [doc, cls] : winners) by_class[cls].push_back(doc);
    if (by_class.size() < 2) throw DataError("downsample_balance: need at least two classes");
    std::size_t m = std::numeric_limits<std::size_t>::max();
    for (const auto& [_, docs] : by_class) m = std::min(m, docs.size());
    std::vector<std::string> out;
    for (auto& [cls, docs] : by_class) {
        Rng rng(derive_seed(seed, cls));
        // Partial Fisher-Yates: the first m entries are a uniform subset.
        for (std::size_t i = 0; i < m; ++i) {
            std::size_t j = i + uniform_index(rng, docs.size() - i);
            std::swap(docs[i], docs[j]);
        }
        out.insert(out.end(), docs.begin(), docs.begin() + static_cast<std::ptrdiff_t>(m));
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<double> SchemaPredictor::predict_proba(std::string_view headline) const {
    return classifier.predict_proba(featurizer.features(headline));
}

const std::string& SchemaPredictor::predict(std::string_view headline) const {
    return classifier.predict(featurizer.features(headline));
}

nlohmann::json SchemaPredictor::to_json() const {
    return {{"format", "srcplan-predictor"},
            {"version", 1},
            {"featurizer", featurizer.to_json()},
            {"classifier", classifier.to_json()}};
}

SchemaPredictor SchemaPredictor::from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "srcplan-predictor") throw DataError("not a schema predictor file");
    SchemaPredictor p;
    p.featurizer = HeadlineFeaturizer::from_json(j.at("featurizer"));
    p.classifier = MultinomialLogReg::from_json(j.at("classifier"));
    return p;
}

void SchemaPredictor::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << to_json().dump() << '\n';
}

SchemaPredictor SchemaPredictor::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path.string());
    try {
        return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

MultinomialLogReg train_schema_predictor(std::span<const SparseVector> features,
                                         std::span<const std::string> winners, std::size_t n_features,
                                         const LogRegParams& params) {
    std::set<std::string> classes(winners.begin(), winners.end());
    if (classes.size() < 2) throw DataError("schema predictor needs at least two winning schemata");
    return MultinomialLogReg::fit(features, winners, n_features, params);
}

SchemaPredictor fit_schema_predictor(const Corpus& corpus, const std::map<std::string, std::string>& winners,
                                     std::size_t min_df, const LogRegParams& params, std::uint64_t seed) {
    SchemaPredictor p;
    p.featurizer = HeadlineFeaturizer::fit(corpus, min_df);
    std::map<std::string, std::string> train;
    std::size_t empty = 0;
    for (const auto& [doc_id, cls] : winners) {
        const Document* doc = corpus.find(doc_id);
        if (!doc) throw DataError("winner table names unknown document '" + doc_id + "'");
        if (corpus.split_of(doc_id) != Split::train) continue;
        if (tokenize(doc->headline).empty()) {
            ++empty;
            continue;
        }
        train.emplace(doc_id, cls);
    }
    if (empty > 0) log_warning("schema predictor: skipped " + std::to_string(empty) + " empty headlines");
    std::vector<SparseVector> xs;
    std::vector<std::string> ys;
    for (const auto& id : downsample_balance(train, seed)) {
        xs.push_back(p.featurizer.features(corpus.find(id)->headline));
        ys.push_back(train.at(id));
    }
    p.classifier = train_schema_predictor(xs, ys, p.featurizer.size(), params);
    return p;
}

double binary_auc(std::span<const double> scores, std::span<const bool> positive) {
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double rank_sum = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
        for (std::size_t t = i; t < j; ++t)
            if (positive[order[t]]) {
                rank_sum += midrank;
                ++n_pos;
            }
        i = j;
    }
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) return std::numeric_limits<double>::quiet_NaN();
    const double np = static_cast<double>(n_pos);
    return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

AucResult roc_auc(std::span<const std::vector<double>> scores, std::span<const std::size_t> truths,
                  std::size_t n_classes) {
    if (scores.size() != truths.size()) throw std::invalid_argument("roc_auc: length mismatch");
    AucResult r;
    r.per_class.assign(n_classes, std::numeric_limits<double>::quiet_NaN());
    double sum = 0.0;
    std::vector<double> s(scores.size());
    std::unique_ptr<bool[]> pos(new bool[scores.size()]);
    for (std::size_t c = 0; c < n_classes; ++c) {
        for (std::size_t i = 0; i < scores.size(); ++i) {
            s[i] = scores[i].at(c);
            pos[i] = truths[i] == c;
        }
        const double auc = binary_auc(s, std::span<const bool>(pos.get(), scores.size()));
        if (std::isnan(auc)) {
            log_warning("roc_auc: class " + std::to_string(c) + " lacks positives or negatives; skipped");
            continue;
        }
        r.per_class[c] = auc;
        sum += auc;
        ++r.n_scored_classes;
    }
    r.macro = r.n_scored_classes ? sum / static_cast<double>(r.n_scored_classes)
                                 : std::numeric_limits<double>::quiet_NaN();
    return r;
}

std::string_view to_string(EvalMode m) { return m == EvalMode::balanced ? "balanced" : "natural"; }

EvalMode eval_mode_from_string(std::string_view s) {
    if (s == "balanced") return EvalMode::balanced;
    if (s == "natural") return EvalMode::natural;
    throw UsageError("unknown eval mode '" + std::string(s) + "' (balanced|natural)");
}

PredictorReport evaluate_schema_predictor(const SchemaPredictor& predictor, const Corpus& corpus,
                                          const std::map<std::string, std::string>& winners, EvalMode mode,
                                          std::uint64_t seed) {
    std::map<std::string, std::string> eval;
    for (const auto& [doc_id, cls] : winners) {
        const Document* doc = corpus.find(doc_id);
        if (!doc) throw DataError("winner table names unknown document '" + doc_id + "'");
        if (corpus.split_of(doc_id) == Split::eval && !tokenize(doc->headline).empty()) eval.emplace(doc_id, cls);
    }
    std::vector<std::string> ids;
    if (mode == EvalMode::balanced) {
        ids = downsample_balance(eval, seed);
    } else {
        for (const auto& [id, _] : eval) ids.push_back(id);
    }
    if (ids.empty()) throw DataError("schema predictor: no eval documents to score");

    const auto& classes = predictor.classifier.classes();
    PredictorReport rep;
    rep.mode = mode;
    rep.n = ids.size();
    rep.classes = classes;
    std::vector<std::vector<double>> scores;
    std::vector<std::size_t> truths;
    std::vector<std::string> predicted, truth;
    for (const auto& id : ids) {
        const auto& headline = corpus.find(id)->headline;
        const auto& cls = eval.at(id);
        auto it = std::find(classes.begin(), classes.end(), cls);
        predicted.push_back(predictor.predict(headline));
        truth.push_back(cls);
        if (it == classes.end()) continue;  // schema never won in training; counts toward F1 only
        scores.push_back(predictor.predict_proba(headline));
        truths.push_back(static_cast<std::size_t>(it - classes.begin()));
    }
    rep.micro_f1 = micro_f1(predicted, truth);
    auto auc = roc_auc(scores, truths, classes.size());
    rep.macro_auc = auc.macro;
    rep.per_class_auc = auc.per_class;
    return rep;
}

}  // namespace srcplan
