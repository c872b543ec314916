#include "srcplan/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "srcplan/error.hpp"
#include "srcplan/log.hpp"
#include "srcplan/rng.hpp"

namespace srcplan {

Tokens source_tokens(const Document& doc, const SourceRecord& src) {
    Tokens out;
    for (std::size_t idx : src.sentence_indices) {
        auto t = tokenize(doc.sentences.at(idx));
        out.insert(out.end(), t.begin(), t.end());
    }
    return out;
}

TfidfModel TfidfModel::fit(const Corpus& corpus, const EmbeddingConfig& cfg) {
    if (cfg.vector_dim < 2) throw UsageError("embedding vector_dim must be at least 2");
    if (corpus.documents.empty()) throw DataError("cannot embed an empty corpus");
    std::map<std::string, std::size_t> df;
    std::size_t n_sources = 0;
    for (const auto& doc : corpus.documents) {
        for (const auto& src : doc.sources) {
            auto toks = source_tokens(doc, src);
            std::set<std::string> uniq(toks.begin(), toks.end());
            for (const auto& t : uniq) ++df[t];
            ++n_sources;
        }
    }
    std::vector<std::pair<std::string, std::size_t>> kept;
    for (const auto& [t, c] : df)
        if (c >= cfg.min_df) kept.emplace_back(t, c);
    // Most frequent first; std::map order already makes ties lexicographic.
    std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    if (kept.size() > cfg.vector_dim) kept.resize(cfg.vector_dim);
    std::sort(kept.begin(), kept.end());

    TfidfModel m;
    const double n = static_cast<double>(n_sources);
    for (const auto& [t, c] : kept) {
        m.index_.emplace(t, m.terms_.size());
        m.terms_.push_back(t);
        const double d = static_cast<double>(c);
        m.idf_.push_back(cfg.idf_smooth ? std::log((1.0 + n) / (1.0 + d)) + 1.0 : std::log(n / d) + 1.0);
    }
    return m;
}

std::vector<double> TfidfModel::transform(std::span<const std::string> tokens) const {
    std::vector<double> v(terms_.size(), 0.0);
    for (const auto& t : tokens) {
        auto it = index_.find(t);
        if (it != index_.end()) v[it->second] += 1.0;
    }
    double norm2 = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] *= idf_[i];
        norm2 += v[i] * v[i];
    }
    if (norm2 > 0.0) {
        const double inv = 1.0 / std::sqrt(norm2);
        for (auto& x : v) x *= inv;
    }
    return v;
}

std::map<SourceKey, std::vector<double>> tfidf_embed(const Corpus& corpus, const EmbeddingConfig& cfg) {
    auto model = TfidfModel::fit(corpus, cfg);
    std::map<SourceKey, std::vector<double>> out;
    for (const auto& doc : corpus.documents) {
        for (const auto& src : doc.sources) {
            auto v = model.transform(source_tokens(doc, src));
            if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; }))
                log_warning("source '" + doc.id + "/" + src.source_id + "' has no retained terms; zero vector");
            out.emplace(SourceKey{doc.id, src.source_id}, std::move(v));
        }
    }
    return out;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

std::vector<std::size_t> assign_to_centroids(std::span<const std::vector<double>> points,
                                             std::span<const std::vector<double>> centroids) {
    std::vector<std::size_t> out(points.size(), 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < centroids.size(); ++c) {
            const double d = squared_distance(points[i], centroids[c]);
            if (d < best) {
                best = d;
                out[i] = c;
            }
        }
    }
    return out;
}

namespace {

double inertia_of(std::span<const std::vector<double>> points, std::span<const std::vector<double>> centroids,
                  std::span<const std::size_t> assignment) {
    double s = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) s += squared_distance(points[i], centroids[assignment[i]]);
    return s;
}

std::vector<std::vector<double>> kmeanspp_seeds(std::span<const std::vector<double>> points, std::size_t k,
                                                Rng& rng) {
    const std::size_t n = points.size();
    std::vector<std::vector<double>> centroids;
    std::vector<bool> chosen(n, false);
    std::size_t first = uniform_index(rng, n);
    centroids.push_back(points[first]);
    chosen[first] = true;
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(points[i], centroids[0]);
    while (centroids.size() < k) {
        double total = 0.0;
        for (double d : d2) total += d;
        std::size_t pick;
        if (total > 0.0) {
            pick = sample_discrete(rng, d2);
        } else {
            // Remaining points coincide with chosen centroids.
            std::vector<std::size_t> rest;
            for (std::size_t i = 0; i < n; ++i)
                if (!chosen[i]) rest.push_back(i);
            pick = rest[uniform_index(rng, rest.size())];
        }
        chosen[pick] = true;
        centroids.push_back(points[pick]);
        for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(points[i], centroids.back()));
    }
    return centroids;
}

}  // namespace

KMeansResult kmeans_cluster(std::span<const std::vector<double>> points, std::size_t k, std::size_t max_iter,
                            std::uint64_t seed) {
    if (k == 0) throw std::invalid_argument("kmeans: k must be positive");
    if (k > points.size())
        throw std::invalid_argument("kmeans: k = " + std::to_string(k) + " exceeds " +
                                    std::to_string(points.size()) + " points");
    const std::size_t dim = points.front().size();
    Rng rng(seed);

    KMeansResult r;
    r.k = k;
    r.centroids = kmeanspp_seeds(points, k, rng);
    r.assignment = assign_to_centroids(points, r.centroids);
    r.inertia_history.push_back(inertia_of(points, r.centroids, r.assignment));

    for (std::size_t it = 0; it < max_iter; ++it) {
        std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
        std::vector<std::size_t> sizes(k, 0);
        for (std::size_t i = 0; i < points.size(); ++i) {
            ++sizes[r.assignment[i]];
            for (std::size_t d = 0; d < dim; ++d) sums[r.assignment[i]][d] += points[i][d];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (sizes[c] == 0) continue;  // empty cluster keeps its centroid
            for (std::size_t d = 0; d < dim; ++d) r.centroids[c][d] = sums[c][d] / static_cast<double>(sizes[c]);
        }
        ++r.iterations;
        auto next = assign_to_centroids(points, r.centroids);
        const double inertia = inertia_of(points, r.centroids, next);
        const double prev = r.inertia_history.back();
        if (inertia > prev + 1e-12 * std::max(1.0, prev))
            throw std::logic_error("kmeans: inertia increased from " + std::to_string(prev) + " to " +
                                   std::to_string(inertia));
        r.inertia_history.push_back(inertia);
        const bool changed = next != r.assignment;
        r.assignment = std::move(next);
        if (!changed) break;
    }
    r.inertia = inertia_of(points, r.centroids, r.assignment);
    return r;
}

Labeling random_labeling(const Document& doc, std::size_t k, std::uint64_t seed, std::string schema) {
    if (k < 1) throw UsageError("random baseline needs k >= 1");
    Labeling lab;
    lab.schema = std::move(schema);
    lab.provenance = Provenance::random_baseline;
    Rng rng(seed);
    for (const auto& src : doc.sources) lab.assignments[src.source_id] = "r" + std::to_string(uniform_index(rng, k));
    return lab;
}

LabelingSet random_labelings(const Corpus& corpus, std::size_t k, std::uint64_t seed, std::string schema) {
    LabelingSet out;
    for (const auto& doc : corpus.documents)
        out.emplace(doc.id, random_labeling(doc, k, derive_seed(seed, doc.id), schema));
    return out;
}

KMeansLabeling kmeans_labeling(const Corpus& corpus, std::size_t k, const EmbeddingConfig& cfg,
                               std::uint64_t seed, std::size_t max_iter, std::string schema) {
    KMeansLabeling out;
    out.embedding = TfidfModel::fit(corpus, cfg);
    std::vector<std::vector<double>> points;
    for (const auto& doc : corpus.documents) {
        for (const auto& src : doc.sources) {
            out.keys.push_back({doc.id, src.source_id});
            points.push_back(out.embedding.transform(source_tokens(doc, src)));
        }
    }
    out.clusters = kmeans_cluster(points, k, max_iter, seed);
    for (const auto& doc : corpus.documents) {
        Labeling lab;
        lab.schema = schema;
        lab.provenance = Provenance::kmeans_baseline;
        out.labelings.emplace(doc.id, std::move(lab));
    }
    for (std::size_t i = 0; i < out.keys.size(); ++i)
        out.labelings[out.keys[i].doc_id].assignments[out.keys[i].source_id] =
            std::to_string(out.clusters.assignment[i]);
    return out;
}

double noise_probability(double current_acc, double target_acc, std::size_t k) {
    if (k < 2) throw UsageError("noise equalization needs at least 2 labels");
    const double chance = 1.0 / static_cast<double>(k);
    if (current_acc > 1.0) throw UsageError("current accuracy above 1");
    if (target_acc > current_acc) throw UsageError("target accuracy above current accuracy");
    if (target_acc < chance) throw UsageError("target accuracy below chance (1/k)");
    const double denom = current_acc - (1.0 - current_acc) / static_cast<double>(k - 1);
    if (denom <= 0.0) return 0.0;  // current == target == chance
    return (current_acc - target_acc) / denom;
}

Labeling noise_equalize(const Labeling& labeling, const SchemaDef& schema, double current_acc, double target_acc,
                        std::uint64_t seed) {
    const std::size_t k = schema.size();
    const double p = noise_probability(current_acc, target_acc, k);
    Labeling out = labeling;
    out.provenance = Provenance::noise_equalized;
    Rng rng(seed);
    for (auto& [sid, label] : out.assignments) {
        auto idx = schema.index_of(label);
        if (!idx) throw DataError("label '" + label + "' not in schema '" + schema.name + "'");
        if (uniform01(rng) >= p) continue;
        std::size_t other = uniform_index(rng, k - 1);
        if (other >= *idx) ++other;
        label = schema.labels[other];
    }
    return out;
}

}  // namespace srcplan
