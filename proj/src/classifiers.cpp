#include "wdn/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wdn/errors.hpp"
#include "wdn/parallel.hpp"
#include "wdn/random.hpp"

namespace wdn {

std::vector<int> argmax_rows(const Eigen::MatrixXd& scores) {
    std::vector<int> out(scores.rows());
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < scores.cols(); ++c) {
            if (scores(r, c) > scores(r, best)) {
                best = c;
            }
        }
        out[r] = static_cast<int>(best);
    }
    return out;
}

namespace {

void check_labels(const Eigen::MatrixXd& X, const std::vector<int>& labels, int num_classes) {
    if (static_cast<Eigen::Index>(labels.size()) != X.rows()) {
        throw DataError("classifier: label count does not match sample count");
    }
    if (X.rows() == 0) {
        throw DataError("classifier: no training samples");
    }
    if (num_classes < 1) {
        throw DataError("classifier: need at least one class");
    }
    for (int label : labels) {
        if (label < 0 || label >= num_classes) {
            throw DataError("classifier: label out of range");
        }
    }
}

}

Eigen::MatrixXd LogisticRegression::standardize(const Eigen::MatrixXd& X) const {
    return (X.rowwise() - mean_).array().rowwise() / scale_.array();
}

void LogisticRegression::fit(const Eigen::MatrixXd& X, const std::vector<int>& labels, int num_classes) {
    check_labels(X, labels, num_classes);
    const Eigen::Index n = X.rows();
    const Eigen::Index dim = X.cols();

    mean_ = X.colwise().mean();
    Eigen::MatrixXd centered = X.rowwise() - mean_;
    scale_ = (centered.array().square().colwise().sum() / static_cast<double>(n)).sqrt();
    for (Eigen::Index c = 0; c < dim; ++c) {
        if (!(scale_[c] > 0)) {
            scale_[c] = 1;
        }
    }
    const Eigen::MatrixXd Z = standardize(X);

    Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(n, num_classes);
    for (Eigen::Index r = 0; r < n; ++r) {
        onehot(r, labels[r]) = 1;
    }

    weights_ = Eigen::MatrixXd::Zero(dim, num_classes);
    bias_ = Eigen::RowVectorXd::Zero(num_classes);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (int epoch = 0; epoch < options_.epochs; ++epoch) {
        Eigen::MatrixXd logits = (Z * weights_).rowwise() + bias_;
        Eigen::VectorXd row_max = logits.rowwise().maxCoeff();
        Eigen::MatrixXd prob = (logits.colwise() - row_max).array().exp();
        prob.array().colwise() /= prob.rowwise().sum().array();
        Eigen::MatrixXd residual = (prob - onehot) * inv_n;
        weights_ -= options_.learning_rate * (Z.transpose() * residual + options_.l2 * weights_);
        bias_ -= options_.learning_rate * residual.colwise().sum();
    }
}

Eigen::MatrixXd LogisticRegression::predict_proba(const Eigen::MatrixXd& X) const {
    Eigen::MatrixXd logits = (standardize(X) * weights_).rowwise() + bias_;
    Eigen::VectorXd row_max = logits.rowwise().maxCoeff();
    Eigen::MatrixXd prob = (logits.colwise() - row_max).array().exp();
    prob.array().colwise() /= prob.rowwise().sum().array();
    return prob;
}

std::vector<int> LogisticRegression::predict(const Eigen::MatrixXd& X) const {
    return argmax_rows(predict_proba(X));
}

double gini_impurity(const std::vector<double>& counts) {
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    if (total <= 0) {
        return 0;
    }
    double sum_sq = 0;
    for (double c : counts) {
        sum_sq += (c / total) * (c / total);
    }
    return 1 - sum_sq;
}

namespace {

struct TreeBuilder {
    const Eigen::MatrixXd& X;
    const std::vector<int>& labels;
    int num_classes;
    int max_features;
    const RandomForestOptions& options;
    Rng& rng;
    RandomForest::Tree tree;

    std::vector<double> class_counts(const std::vector<std::size_t>& rows) const {
        std::vector<double> counts(num_classes, 0.0);
        for (auto r : rows) {
            counts[labels[r]] += 1;
        }
        return counts;
    }

    int make_leaf(const std::vector<double>& counts) {
        RandomForest::Node node;
        const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
        node.distribution.resize(num_classes);
        for (int c = 0; c < num_classes; ++c) {
            node.distribution[c] = counts[c] / total;
        }
        tree.push_back(std::move(node));
        return static_cast<int>(tree.size() - 1);
    }

    int build(std::vector<std::size_t> rows, int depth) {
        const auto counts = class_counts(rows);
        const double parent_impurity = gini_impurity(counts);
        const auto n = rows.size();
        if (parent_impurity == 0 || n < 2 * static_cast<std::size_t>(options.min_leaf) || (options.max_depth > 0 && depth >= options.max_depth)) {
            return make_leaf(counts);
        }

        std::vector<int> features(X.cols());
        std::iota(features.begin(), features.end(), 0);
        // Partial Fisher-Yates to draw the candidate features.
        for (int i = 0; i < max_features; ++i) {
            const auto j = i + uniform_index(rng, features.size() - i);
            std::swap(features[i], features[j]);
        }

        double best_score = parent_impurity * static_cast<double>(n);
        int best_feature = -1;
        double best_threshold = 0;

        std::vector<std::pair<double, int>> sorted(n);
        for (int f = 0; f < max_features; ++f) {
            const int feature = features[f];
            for (std::size_t i = 0; i < n; ++i) {
                sorted[i] = {X(rows[i], feature), labels[rows[i]]};
            }
            std::sort(sorted.begin(), sorted.end());

            std::vector<double> left(num_classes, 0.0);
            std::vector<double> right = counts;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                left[sorted[i].second] += 1;
                right[sorted[i].second] -= 1;
                if (sorted[i].first == sorted[i + 1].first) {
                    continue;
                }
                const auto nl = i + 1;
                const auto nr = n - nl;
                if (nl < static_cast<std::size_t>(options.min_leaf) || nr < static_cast<std::size_t>(options.min_leaf)) {
                    continue;
                }
                const double score = gini_impurity(left) * static_cast<double>(nl) + gini_impurity(right) * static_cast<double>(nr);
                if (score < best_score - 1e-12) {
                    best_score = score;
                    best_feature = feature;
                    best_threshold = 0.5 * (sorted[i].first + sorted[i + 1].first);
                }
            }
        }

        if (best_feature < 0) {
            return make_leaf(counts);
        }

        std::vector<std::size_t> left_rows, right_rows;
        for (auto r : rows) {
            (X(r, best_feature) <= best_threshold ? left_rows : right_rows).push_back(r);
        }
        rows.clear();
        rows.shrink_to_fit();

        const int index = static_cast<int>(tree.size());
        tree.emplace_back();
        tree[index].feature = best_feature;
        tree[index].threshold = best_threshold;
        const int left_child = build(std::move(left_rows), depth + 1);
        const int right_child = build(std::move(right_rows), depth + 1);
        tree[index].left = left_child;
        tree[index].right = right_child;
        return index;
    }
};

}

void RandomForest::fit(const Eigen::MatrixXd& X, const std::vector<int>& labels, int num_classes, std::uint64_t seed) {
    check_labels(X, labels, num_classes);
    if (options_.trees < 1) {
        throw DataError("random forest needs at least one tree");
    }
    num_classes_ = num_classes;
    const int dim = static_cast<int>(X.cols());
    int max_features = options_.max_features > 0 ? options_.max_features : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(dim))));
    max_features = std::clamp(max_features, 1, dim);

    trees_.assign(options_.trees, {});
    parallel_for(static_cast<std::size_t>(options_.trees), options_.threads, [&](std::size_t t) {
        Rng rng(child_seed(seed, t));
        std::vector<std::size_t> rows(X.rows());
        if (options_.bootstrap) {
            for (auto& r : rows) {
                r = uniform_index(rng, X.rows());
            }
        } else {
            std::iota(rows.begin(), rows.end(), 0);
        }
        TreeBuilder builder{X, labels, num_classes, max_features, options_, rng, {}};
        builder.build(std::move(rows), 0);
        trees_[t] = std::move(builder.tree);
    });
}

Eigen::MatrixXd RandomForest::predict_proba(const Eigen::MatrixXd& X) const {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(X.rows(), num_classes_);
    for (const auto& tree : trees_) {
        for (Eigen::Index r = 0; r < X.rows(); ++r) {
            int node = 0;
            while (tree[node].feature >= 0) {
                node = X(r, tree[node].feature) <= tree[node].threshold ? tree[node].left : tree[node].right;
            }
            for (int c = 0; c < num_classes_; ++c) {
                out(r, c) += tree[node].distribution[c];
            }
        }
    }
    return out / static_cast<double>(trees_.size());
}

std::vector<int> RandomForest::predict(const Eigen::MatrixXd& X) const {
    return argmax_rows(predict_proba(X));
}

}
