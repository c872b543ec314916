#pragma once

// Multinomial logistic regression over sparse features, fit by full-batch
// gradient descent on mean cross-entropy plus an L2 penalty on the
// non-bias weights.

#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace srcplan {

using SparseVector = std::vector<std::pair<std::size_t, double>>;

struct LogRegParams {
    double l2 = 1e-3;
    std::size_t epochs = 300;
    double lr = 0.5;
};

class MultinomialLogReg {
public:
    // Classes are the sorted distinct labels in `ys`. With a single class the
    // result is the constant predictor.
    static MultinomialLogReg fit(std::span<const SparseVector> xs, std::span<const std::string> ys,
                                 std::size_t n_features, const LogRegParams& params);

    std::vector<double> predict_proba(const SparseVector& x) const;
    // Highest-probability class; ties go to the lexicographically first class.
    const std::string& predict(const SparseVector& x) const;

    const std::vector<std::string>& classes() const { return classes_; }
    std::size_t n_features() const { return n_features_; }
    bool is_constant() const { return classes_.size() == 1; }

    // Objective and its gradient at the given flat weights, laid out
    // class-major with the bias last: w[c * (n_features + 1) + f].
    static double objective(std::span<const double> weights, std::span<const SparseVector> xs,
                            std::span<const std::size_t> ys, std::size_t n_classes,
                            std::size_t n_features, double l2, std::vector<double>* gradient);

    const std::vector<double>& weights() const { return weights_; }
    // Class index of each label in `ys`, against classes().
    std::vector<std::size_t> encode_labels(std::span<const std::string> ys) const;

    nlohmann::json to_json() const;
    static MultinomialLogReg from_json(const nlohmann::json& j);

private:
    std::vector<std::string> classes_;
    std::size_t n_features_ = 0;
    std::vector<double> weights_;
};

}  // namespace srcplan
