#include "srcplan/logreg.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace srcplan {

namespace {

void softmax_scores(std::span<const double> w, const SparseVector& x, std::size_t n_classes,
                    std::size_t n_features, std::vector<double>& out) {
    const std::size_t stride = n_features + 1;
    out.assign(n_classes, 0.0);
    for (std::size_t c = 0; c < n_classes; ++c) {
        double z = w[c * stride + n_features];
        for (const auto& [f, v] : x)
            if (f < n_features) z += w[c * stride + f] * v;
        out[c] = z;
    }
    const double mx = *std::max_element(out.begin(), out.end());
    double sum = 0.0;
    for (auto& z : out) {
        z = std::exp(z - mx);
        sum += z;
    }
    for (auto& z : out) z /= sum;
}

}  // namespace

double MultinomialLogReg::objective(std::span<const double> weights, std::span<const SparseVector> xs,
                                    std::span<const std::size_t> ys, std::size_t n_classes,
                                    std::size_t n_features, double l2, std::vector<double>* gradient) {
    const std::size_t stride = n_features + 1;
    if (gradient) gradient->assign(weights.size(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(xs.size());
    double loss = 0.0;
    std::vector<double> p;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        softmax_scores(weights, xs[i], n_classes, n_features, p);
        loss -= std::log(std::max(p[ys[i]], 1e-300)) * inv_n;
        if (!gradient) continue;
        for (std::size_t c = 0; c < n_classes; ++c) {
            const double r = (p[c] - (c == ys[i] ? 1.0 : 0.0)) * inv_n;
            (*gradient)[c * stride + n_features] += r;
            for (const auto& [f, v] : xs[i])
                if (f < n_features) (*gradient)[c * stride + f] += r * v;
        }
    }
    for (std::size_t c = 0; c < n_classes; ++c) {
        for (std::size_t f = 0; f < n_features; ++f) {
            const double wf = weights[c * stride + f];
            loss += 0.5 * l2 * wf * wf;
            if (gradient) (*gradient)[c * stride + f] += l2 * wf;
        }
    }
    return loss;
}

MultinomialLogReg MultinomialLogReg::fit(std::span<const SparseVector> xs, std::span<const std::string> ys,
                                         std::size_t n_features, const LogRegParams& params) {
    if (xs.size() != ys.size()) throw std::invalid_argument("fit: features and labels differ in length");
    if (xs.empty()) throw std::invalid_argument("fit: no training instances");
    MultinomialLogReg m;
    std::set<std::string> distinct(ys.begin(), ys.end());
    m.classes_.assign(distinct.begin(), distinct.end());
    m.n_features_ = n_features;
    const std::size_t k = m.classes_.size();
    m.weights_.assign(k * (n_features + 1), 0.0);
    if (k == 1) return m;

    const auto labels = m.encode_labels(ys);
    std::vector<double> grad;
    for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
        objective(m.weights_, xs, labels, k, n_features, params.l2, &grad);
        for (std::size_t i = 0; i < m.weights_.size(); ++i) m.weights_[i] -= params.lr * grad[i];
    }
    return m;
}

std::vector<std::size_t> MultinomialLogReg::encode_labels(std::span<const std::string> ys) const {
    std::vector<std::size_t> out;
    out.reserve(ys.size());
    for (const auto& y : ys) {
        auto it = std::lower_bound(classes_.begin(), classes_.end(), y);
        if (it == classes_.end() || *it != y) throw std::invalid_argument("unknown class '" + y + "'");
        out.push_back(static_cast<std::size_t>(it - classes_.begin()));
    }
    return out;
}

std::vector<double> MultinomialLogReg::predict_proba(const SparseVector& x) const {
    if (classes_.size() == 1) return {1.0};
    std::vector<double> p;
    softmax_scores(weights_, x, classes_.size(), n_features_, p);
    return p;
}

const std::string& MultinomialLogReg::predict(const SparseVector& x) const {
    auto p = predict_proba(x);
    return classes_[static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin())];
}

nlohmann::json MultinomialLogReg::to_json() const {
    return {{"classes", classes_}, {"n_features", n_features_}, {"weights", weights_}};
}

MultinomialLogReg MultinomialLogReg::from_json(const nlohmann::json& j) {
    MultinomialLogReg m;
    m.classes_ = j.at("classes").get<std::vector<std::string>>();
    m.n_features_ = j.at("n_features").get<std::size_t>();
    m.weights_ = j.at("weights").get<std::vector<double>>();
    if (m.weights_.size() != m.classes_.size() * (m.n_features_ + 1))
        throw std::invalid_argument("classifier weights have the wrong size");
    return m;
}

}  // namespace srcplan
