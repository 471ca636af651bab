#ifndef WDN_CLASSIFIERS_HPP
#define WDN_CLASSIFIERS_HPP

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

/**
 * @file classifiers.hpp
 * @brief Small from-scratch classifiers used to measure how much domain information remains.
 *
 * Labels are integers in `[0, num_classes)`; samples are rows of the feature matrix.
 */

namespace wdn {

struct LogisticRegressionOptions {
    double l2 = 1e-4;
    int epochs = 500;
    double learning_rate = 0.1;
};

/**
 * Multinomial logistic regression trained by full-batch gradient descent on the
 * L2-penalized cross-entropy. Features are standardized with the training mean and
 * standard deviation; constant features are left centered.
 */
class LogisticRegression {
public:
    explicit LogisticRegression(LogisticRegressionOptions options = {}) : options_(options) {}

    void fit(const Eigen::MatrixXd& X, const std::vector<int>& labels, int num_classes);

    /// Class probabilities, one row per sample.
    Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& X) const;

    std::vector<int> predict(const Eigen::MatrixXd& X) const;

private:
    Eigen::MatrixXd standardize(const Eigen::MatrixXd& X) const;

    LogisticRegressionOptions options_;
    Eigen::RowVectorXd mean_;
    Eigen::RowVectorXd scale_;
    Eigen::MatrixXd weights_; // dim x classes
    Eigen::RowVectorXd bias_;
};

struct RandomForestOptions {
    int trees = 100;
    /// Features tried per split; 0 means `ceil(sqrt(dim))`.
    int max_features = 0;
    /// 0 means unlimited.
    int max_depth = 0;
    int min_leaf = 1;
    bool bootstrap = true;
    int threads = 1;
};

/// Gini impurity `1 - sum_c p_c^2` of a class-count vector.
double gini_impurity(const std::vector<double>& counts);

/**
 * Random forest of CART trees split on Gini impurity. Each tree is grown from its own
 * child seed, so the fitted forest does not depend on the number of threads.
 */
class RandomForest {
public:
    explicit RandomForest(RandomForestOptions options = {}) : options_(options) {}

    void fit(const Eigen::MatrixXd& X, const std::vector<int>& labels, int num_classes, std::uint64_t seed);

    /// Mean of per-tree leaf class distributions.
    Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& X) const;

    std::vector<int> predict(const Eigen::MatrixXd& X) const;

    struct Node {
        int feature = -1;
        double threshold = 0;
        int left = -1;
        int right = -1;
        std::vector<double> distribution;
    };
    using Tree = std::vector<Node>;

    const std::vector<Tree>& trees() const {
        return trees_;
    }

private:
    RandomForestOptions options_;
    int num_classes_ = 0;
    std::vector<Tree> trees_;
};

/// Argmax per row, ties to the smaller class index.
std::vector<int> argmax_rows(const Eigen::MatrixXd& scores);

}

#endif
