#pragma once

// Matched-size baseline labelings: random identifiers (base-r) and k-means
// clusters of TF-IDF source vectors (base-k). Also the label-swapping noise
// that brings classifiers of different accuracy to a common level.

#include <compare>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "srcplan/corpus.hpp"

namespace srcplan {

struct SourceKey {
    std::string doc_id;
    std::string source_id;
    auto operator<=>(const SourceKey&) const = default;
};

struct EmbeddingConfig {
    std::size_t vector_dim = 512;  // keep the vector_dim most frequent terms
    std::size_t min_df = 1;
    bool idf_smooth = true;        // ln((1+N)/(1+df)) + 1, else ln(N/df) + 1
};

// Each source's attributed text is one TF-IDF "document".
class TfidfModel {
public:
    static TfidfModel fit(const Corpus& corpus, const EmbeddingConfig& cfg);

    // Raw term counts times idf, L2-normalized. Terms outside the fitted
    // vocabulary are ignored; if nothing remains the zero vector is returned.
    std::vector<double> transform(std::span<const std::string> tokens) const;

    const std::vector<std::string>& terms() const { return terms_; }
    const std::vector<double>& idf() const { return idf_; }

private:
    std::vector<std::string> terms_;
    std::map<std::string, std::size_t> index_;
    std::vector<double> idf_;
};

// Attributed tokens of a source without sentence-boundary markers.
Tokens source_tokens(const Document& doc, const SourceRecord& src);

std::map<SourceKey, std::vector<double>> tfidf_embed(const Corpus& corpus, const EmbeddingConfig& cfg);

struct KMeansResult {
    std::size_t k = 0;
    std::vector<std::vector<double>> centroids;
    std::vector<std::size_t> assignment;  // per input point
    double inertia = 0.0;
    std::size_t iterations = 0;
    std::vector<double> inertia_history;  // after every assignment step
};

// Lloyd's algorithm from k-means++ seeds. Stops when no assignment changes
// or after max_iter updates. Throws std::invalid_argument if k is 0 or
// exceeds the number of points, std::logic_error if inertia ever rises.
KMeansResult kmeans_cluster(std::span<const std::vector<double>> points, std::size_t k,
                            std::size_t max_iter, std::uint64_t seed);

// Nearest-centroid index per point (ties to the lower index).
std::vector<std::size_t> assign_to_centroids(std::span<const std::vector<double>> points,
                                             std::span<const std::vector<double>> centroids);

double squared_distance(std::span<const double> a, std::span<const double> b);

// Identifiers "r0" .. "r{k-1}" drawn uniformly with replacement per source.
Labeling random_labeling(const Document& doc, std::size_t k, std::uint64_t seed,
                         std::string schema = "base-r");
LabelingSet random_labelings(const Corpus& corpus, std::size_t k, std::uint64_t seed,
                             std::string schema = "base-r");

struct KMeansLabeling {
    LabelingSet labelings;  // label = cluster id as a decimal string
    KMeansResult clusters;
    std::vector<SourceKey> keys;  // point order used for clustering
    TfidfModel embedding;
};

KMeansLabeling kmeans_labeling(const Corpus& corpus, std::size_t k, const EmbeddingConfig& cfg,
                               std::uint64_t seed, std::size_t max_iter = 100,
                               std::string schema = "base-k");

// Swap probability that takes expected accuracy from `current` to `target`
// when each swapped label is redrawn uniformly from the other k-1 labels.
double noise_probability(double current_acc, double target_acc, std::size_t k);

// Throws UsageError unless 1/k <= target <= current <= 1.
Labeling noise_equalize(const Labeling& labeling, const SchemaDef& schema, double current_acc,
                        double target_acc, std::uint64_t seed);

}  // namespace srcplan
