#include "srcplan/criticism.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "srcplan/error.hpp"
#include "srcplan/log.hpp"
#include "srcplan/parallel.hpp"
#include "srcplan/rng.hpp"
#include "srcplan/stats.hpp"

namespace srcplan {

void NegPromptConfig::validate() const {
    if (!(gamma >= 0.5 && gamma <= 1.0)) throw UsageError("negative-prompting gamma must lie in [0.5, 1]");
}

Labeling shuffle_labels(const Labeling& labeling, std::uint64_t seed) {
    Labeling out = labeling;
    out.provenance = Provenance::shuffled;
    const std::size_t n = labeling.assignments.size();
    if (n < 2) return out;

    std::vector<std::string> labels;
    std::map<std::string, std::size_t> freq;
    for (const auto& [_, l] : labeling.assignments) {
        labels.push_back(l);
        ++freq[l];
    }
    // Most sources whose label can change: all of them unless one label
    // holds more than half the sources.
    std::size_t top = 0;
    for (const auto& [_, c] : freq) top = std::max(top, c);
    const std::size_t reachable = 2 * top <= n ? n : 2 * (n - top);

    Rng rng(seed);
    std::vector<std::size_t> perm(n), best;
    std::size_t best_changed = 0;
    for (int attempt = 0; attempt < 1000 && (best.empty() || best_changed < reachable); ++attempt) {
        std::iota(perm.begin(), perm.end(), 0);
        for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[uniform_index(rng, i + 1)]);
        bool identity = true;
        std::size_t changed = 0;
        for (std::size_t i = 0; i < n; ++i) {
            identity = identity && perm[i] == i;
            changed += labels[perm[i]] != labels[i];
        }
        if (identity) continue;
        if (best.empty() || changed > best_changed) {
            best = perm;
            best_changed = changed;
        }
    }
    perm = best;
    std::size_t i = 0;
    for (auto& [_, l] : out.assignments) l = labels[perm[i++]];
    return out;
}

double negprompt_perplexity(std::span<const double> true_logprobs,
                            std::span<const double> shuffled_logprobs, double gamma) {
    if (true_logprobs.empty()) throw DataError("perplexity of an empty token sequence");
    if (gamma != 1.0 && shuffled_logprobs.size() != true_logprobs.size())
        throw std::invalid_argument("negprompt_perplexity: score vectors differ in length");
    double sum = 0.0;
    for (std::size_t i = 0; i < true_logprobs.size(); ++i) {
        double s = gamma * true_logprobs[i];
        if (gamma != 1.0) s -= (1.0 - gamma) * shuffled_logprobs[i];
        sum += s;
    }
    return std::exp(-sum / static_cast<double>(true_logprobs.size()));
}

double conditional_perplexity(const ConditionalNGram& model, const Document& doc,
                              const Labeling& labeling, const Labeling& shuffled, double gamma) {
    std::vector<double> true_lp, shuffled_lp;
    for (const auto& src : doc.sources) {
        auto zl = labeling.assignments.find(src.source_id);
        if (zl == labeling.assignments.end())
            throw DataError("document '" + doc.id + "': source '" + src.source_id + "' has no label");
        auto toks = attributed_text(doc, src.source_id);
        if (toks.empty()) continue;
        auto ids = model.encode(toks);
        auto zs = model.sequence_logprob_ids(zl->second, ids);
        true_lp.insert(true_lp.end(), zs.per_token.begin(), zs.per_token.end());
        if (gamma != 1.0) {
            auto sl = shuffled.assignments.find(src.source_id);
            if (sl == shuffled.assignments.end())
                throw DataError("document '" + doc.id + "': source '" + src.source_id +
                                "' missing from shuffled labeling");
            auto ss = model.sequence_logprob_ids(sl->second, ids);
            shuffled_lp.insert(shuffled_lp.end(), ss.per_token.begin(), ss.per_token.end());
        }
    }
    if (true_lp.empty()) throw DataError("document '" + doc.id + "' has no attributed tokens");
    return negprompt_perplexity(true_lp, shuffled_lp, gamma);
}

double conditional_perplexity(const ConditionalNGram& model, const Document& doc,
                              const Labeling& labeling, const NegPromptConfig& cfg) {
    cfg.validate();
    if (cfg.gamma == 1.0) return conditional_perplexity(model, doc, labeling, labeling, 1.0);
    auto shuffled = shuffle_labels(labeling, derive_seed(cfg.shuffle_seed, doc.id));
    return conditional_perplexity(model, doc, labeling, shuffled, cfg.gamma);
}

namespace {

bool has_attributed_tokens(const Document& doc) {
    for (const auto& s : doc.sources)
        if (!attributed_text(doc, s.source_id).empty()) return true;
    return false;
}

}  // namespace

std::map<std::string, double> document_perplexities(const Corpus& corpus, const ConditionalNGram& model,
                                                    const LabelingSet& labelings,
                                                    const NegPromptConfig& cfg, Split split) {
    cfg.validate();
    std::vector<const Document*> docs;
    for (const Document* d : corpus.documents_in(split)) {
        if (!has_attributed_tokens(*d)) {
            log_warning("document '" + d->id + "' has no attributed tokens; skipped");
            continue;
        }
        if (!labelings.contains(d->id))
            throw DataError("document '" + d->id + "' has no labeling under '" + model.schema() + "'");
        docs.push_back(d);
    }
    std::vector<double> values(docs.size());
    parallel_for(docs.size(), [&](std::size_t i) {
        values[i] = conditional_perplexity(model, *docs[i], labelings.at(docs[i]->id), cfg);
    });
    std::map<std::string, double> out;
    for (std::size_t i = 0; i < docs.size(); ++i) out.emplace(docs[i]->id, values[i]);
    return out;
}

PerplexityReport make_perplexity_report(
    const std::string& schema, const std::map<std::string, double>& per_document,
    const std::map<std::string, std::map<std::string, double>>& baseline_per_document) {
    if (per_document.empty()) throw DataError("schema '" + schema + "': no evaluated documents");
    PerplexityReport r;
    r.schema = schema;
    r.per_document = per_document;
    std::vector<double> xs;
    for (const auto& [_, v] : per_document) xs.push_back(v);
    r.mean = mean(xs);
    for (const auto& [name, base] : baseline_per_document) {
        std::vector<double> ys;
        for (const auto& [_, v] : base) ys.push_back(v);
        if (ys.empty()) throw DataError("baseline '" + name + "': no evaluated documents");
        r.baseline_mean[name] = mean(ys);
        r.delta_vs_baseline[name] = r.mean - r.baseline_mean[name];
        r.t_test_p[name] = (xs.size() >= 2 && ys.size() >= 2)
                               ? welch_t_test(xs, ys).p
                               : std::numeric_limits<double>::quiet_NaN();
    }
    return r;
}

std::map<std::string, double> crossfit_perplexities(const Corpus& corpus, const SchemaDef& schema,
                                                   const LabelingSet& labelings, const NGramParams& params,
                                                   const NegPromptConfig& cfg, std::size_t folds) {
    if (folds < 2) throw UsageError("cross-fitting needs at least 2 folds");
    auto train = corpus.documents_in(Split::train);
    std::map<std::string, double> out;
    for (std::size_t f = 0; f < folds && f < train.size(); ++f) {
        // Eval-split documents stay out of the view entirely.
        Corpus view;
        for (std::size_t i = 0; i < train.size(); ++i) {
            view.documents.push_back(*train[i]);
            view.split[train[i]->id] = i % folds == f ? Split::eval : Split::train;
        }
        auto model = ConditionalNGram::train(view, schema, labelings, params);
        out.merge(document_perplexities(view, model, labelings, cfg, Split::eval));
    }
    return out;
}

PerplexityReport schema_perplexity_report(const Corpus& corpus, const SchemaDef& schema,
                                          const ConditionalNGram& model, const LabelingSet& labelings,
                                          const std::vector<BaselineGenerator>& baselines,
                                          const NegPromptConfig& cfg) {
    if (corpus.documents_in(Split::eval).empty()) throw DataError("eval split is empty");
    auto per_doc = document_perplexities(corpus, model, labelings, cfg);
    std::map<std::string, std::map<std::string, double>> base_per_doc;
    for (const auto& gen : baselines) {
        LabelingSet labs = gen.generate(corpus, schema.size());
        std::set<std::string> ids;
        for (const auto& [_, lab] : labs)
            for (const auto& [__, l] : lab.assignments) ids.insert(l);
        if (ids.size() > schema.size())
            throw DataError("baseline '" + gen.name + "' uses more than k identifiers");
        SchemaDef base_schema{schema.name + "#" + gen.name, {ids.begin(), ids.end()}};
        std::vector<std::pair<std::string, Tokens>> seqs;
        for (const Document* d : corpus.documents_in(Split::train)) {
            auto it = labs.find(d->id);
            if (it == labs.end()) throw DataError("baseline '" + gen.name + "' misses document '" + d->id + "'");
            for (auto& ls : labeled_sequences(*d, it->second)) seqs.emplace_back(ls.label, std::move(ls.tokens));
        }
        auto base_model = ConditionalNGram::train_sequences(base_schema.name, seqs, model.params());
        base_per_doc[gen.name] = document_perplexities(corpus, base_model, labs, cfg);
    }
    return make_perplexity_report(schema.name, per_doc, base_per_doc);
}

// ---- posterior predictive -------------------------------------------------

PPFeaturizer::PPFeaturizer(const Corpus& corpus, const SchemaDef& schema, std::size_t top_k)
    : labels_(schema.labels), top_k_(top_k) {
    std::set<std::string> vocab;
    for (const Document* d : corpus.documents_in(Split::train)) {
        auto toks = tokenize(d->headline);
        vocab.insert(toks.begin(), toks.end());
    }
    vocab_.assign(vocab.begin(), vocab.end());
    for (std::size_t i = 0; i < vocab_.size(); ++i) vocab_index_.emplace(vocab_[i], i);
}

SparseVector PPFeaturizer::features(std::string_view headline, std::span<const std::string> remaining_labels,
                                    std::size_t held_out_rank) const {
    std::map<std::size_t, double> f;
    for (const auto& tok : tokenize(headline)) {
        auto it = vocab_index_.find(tok);
        if (it != vocab_index_.end()) f[it->second] = 1.0;
    }
    for (const auto& l : remaining_labels) {
        auto it = std::find(labels_.begin(), labels_.end(), l);
        if (it == labels_.end()) throw DataError("label '" + l + "' outside the schema");
        f[vocab_.size() + static_cast<std::size_t>(it - labels_.begin())] += 1.0;
    }
    if (held_out_rank >= top_k_) throw std::invalid_argument("held-out rank beyond top_k");
    f[vocab_.size() + labels_.size() + held_out_rank] = 1.0;
    return {f.begin(), f.end()};
}

PPInstanceSet build_pp_instances(const Corpus& corpus, const SchemaDef& schema,
                                 const LabelingSet& labelings, std::size_t top_k, std::uint64_t seed) {
    if (top_k < 1) throw UsageError("top_k must be at least 1");
    PPInstanceSet set;
    set.featurizer = PPFeaturizer(corpus, schema, top_k);
    for (const auto& doc : corpus.documents) {
        if (doc.sources.empty()) {
            log_warning("document '" + doc.id + "' has no sources; skipped for posterior predictive");
            continue;
        }
        auto lab = labelings.find(doc.id);
        if (lab == labelings.end())
            throw DataError("document '" + doc.id + "' has no labeling under '" + schema.name + "'");
        auto top = top_k_sources(doc, top_k);
        std::vector<std::string> labels;
        for (const auto& sid : top) {
            auto it = lab->second.assignments.find(sid);
            if (it == lab->second.assignments.end())
                throw DataError("document '" + doc.id + "': source '" + sid + "' has no label");
            labels.push_back(it->second);
        }
        Rng rng(derive_seed(seed, doc.id));
        const std::size_t held = uniform_index(rng, top.size());
        std::vector<std::string> remaining;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (i != held) remaining.push_back(labels[i]);

        PPInstance inst;
        inst.doc_id = doc.id;
        inst.held_out_source = top[held];
        inst.held_out_rank = held;
        inst.features = set.featurizer.features(doc.headline, remaining, held);
        inst.held_out_label = labels[held];
        (corpus.split_of(doc.id) == Split::train ? set.train : set.eval).push_back(std::move(inst));
    }
    return set;
}

MultinomialLogReg train_pp_classifier(const PPInstanceSet& instances, const LogRegParams& params) {
    if (instances.train.empty()) throw DataError("no posterior-predictive training instances");
    std::vector<SparseVector> xs;
    std::vector<std::string> ys;
    std::size_t dim = instances.featurizer.n_features();
    for (const auto& inst : instances.train) {
        xs.push_back(inst.features);
        ys.push_back(inst.held_out_label);
        for (const auto& [j, _] : inst.features) dim = std::max<std::size_t>(dim, j + 1);
    }
    return MultinomialLogReg::fit(xs, ys, dim, params);
}

double micro_f1(std::span<const std::string> predicted, std::span<const std::string> truth) {
    if (predicted.size() != truth.size()) throw std::invalid_argument("micro_f1: length mismatch");
    if (truth.empty()) throw std::invalid_argument("micro_f1: no instances");
    // Pooled TP = correct; pooled FP = pooled FN = wrong; F1 = TP / (TP + wrong).
    std::size_t tp = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) tp += predicted[i] == truth[i];
    const double fp = static_cast<double>(truth.size() - tp);
    const double fn = fp;
    const double denom = 2.0 * static_cast<double>(tp) + fp + fn;
    return denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(tp) / denom;
}

PosteriorPredictiveReport evaluate_pp_f1(const MultinomialLogReg& classifier,
                                         std::span<const PPInstance> eval, std::size_t bootstrap_n,
                                         std::uint64_t seed, std::string schema) {
    if (eval.empty()) throw DataError("no posterior-predictive eval instances");
    std::vector<std::string> pred, truth;
    std::vector<double> correct;
    for (const auto& inst : eval) {
        pred.push_back(classifier.predict(inst.features));
        truth.push_back(inst.held_out_label);
        correct.push_back(pred.back() == truth.back() ? 1.0 : 0.0);
    }
    PosteriorPredictiveReport r;
    r.schema = std::move(schema);
    r.micro_f1 = micro_f1(pred, truth);
    r.n_eval = eval.size();
    if (bootstrap_n > 0) {
        auto boot = bootstrap_stat(correct, [](std::span<const double> v) { return mean(v); }, bootstrap_n, seed);
        r.bootstrap_f1 = std::move(boot.replicates);
    }
    return r;
}

void compare_pp(PosteriorPredictiveReport& report, const std::string& baseline_name,
                const PosteriorPredictiveReport& baseline) {
    report.baseline_f1[baseline_name] = baseline.micro_f1;
    report.ratio_vs_baseline[baseline_name] =
        baseline.micro_f1 == 0.0 ? std::numeric_limits<double>::infinity() : report.micro_f1 / baseline.micro_f1;
    const std::size_t n = std::min(report.bootstrap_f1.size(), baseline.bootstrap_f1.size());
    if (n == 0) {
        report.bootstrap_p[baseline_name] = std::numeric_limits<double>::quiet_NaN();
        return;
    }
    std::size_t le = 0, ge = 0;
    for (std::size_t b = 0; b < n; ++b) {
        if (report.bootstrap_f1[b] <= baseline.bootstrap_f1[b]) ++le;
        if (report.bootstrap_f1[b] >= baseline.bootstrap_f1[b]) ++ge;
    }
    report.bootstrap_p[baseline_name] =
        std::min(1.0, 2.0 * static_cast<double>(std::min(le, ge)) / static_cast<double>(n));
}

}  // namespace srcplan
