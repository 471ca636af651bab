#ifndef WDN_METRICS_HPP
#define WDN_METRICS_HPP

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "wdn/classifiers.hpp"
#include "wdn/data_model.hpp"

/**
 * @file metrics.hpp
 * @brief Biological-signal and domain-forgetting metrics.
 *
 * MOA metrics work on per-(treatment, domain) mean embeddings with cosine distance.
 * Domain metrics train classifiers to recover the domain label of individual embeddings.
 */

namespace wdn {

struct TreatmentPoint {
    std::string treatment;
    std::string compound;
    std::string domain;
    std::string moa;
    Eigen::VectorXd mean_vector;
};

/**
 * One point per non-control (treatment, domain) group, in group order.
 * Throws `DataError` if a non-control row has no MOA.
 */
std::vector<TreatmentPoint> treatment_means(const EmbeddingTable& table);

/// `1 - x.y / (|x| |y|)`; zero vectors are rejected with `DataError`.
double cosine_distance(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

enum class NeighborFilter {
    /// Exclude neighbors from the same compound.
    nsc,
    /// Exclude neighbors from the same compound or the same domain.
    nsc_nsb
};

std::string to_string(NeighborFilter filter);

/**
 * For each point, the fraction of its `k` nearest eligible neighbors sharing its MOA.
 * Ties in distance go to the smaller point index. Throws `DataError` naming the first
 * point with fewer than `k` eligible neighbors.
 */
std::vector<double> knn_moa_scores(const std::vector<TreatmentPoint>& points, int k, NeighborFilter filter);

/// Mean of `knn_moa_scores()` as a percentage.
double knn_moa(const std::vector<TreatmentPoint>& points, int k, NeighborFilter filter);

/// Per-point silhouette `s(i)` over MOA clusters; singleton clusters give 0.
std::vector<double> silhouette_values(const std::vector<TreatmentPoint>& points);

/// Mean silhouette; needs at least two MOA clusters.
double silhouette_moa(const std::vector<TreatmentPoint>& points);

enum class DomainClassifier { logreg, rf };

std::string to_string(DomainClassifier classifier);

struct DomainClassificationOptions {
    int folds = 3;
    LogisticRegressionOptions logreg;
    RandomForestOptions forest;
};

/// Rows of `table` with the given treatment.
EmbeddingTable restrict_to_treatment(const EmbeddingTable& table, const std::string& treatment);

/**
 * Stratified k-fold accuracy (percent, averaged over folds) of predicting each row's domain.
 * All rows are expected to share one treatment. Needs at least two domains with at least
 * `folds` rows each. Deterministic given `seed`.
 */
double domain_classification_accuracy(const EmbeddingTable& table, DomainClassifier classifier, std::uint64_t seed, const DomainClassificationOptions& options = {});

/**
 * `domain_classification_accuracy()` after replacing every embedding coordinate with an
 * independent standard normal draw, keeping the domain labels.
 */
double chance_baseline(const EmbeddingTable& table, DomainClassifier classifier, std::uint64_t seed, const DomainClassificationOptions& options = {});

struct MetricReport {
    std::array<double, 4> knn_nsc{};
    std::array<double, 4> knn_nsc_nsb{};
    double silhouette = 0;
    std::optional<double> domain_acc_logreg;
    std::optional<double> domain_acc_rf;
    std::optional<double> chance_logreg;
    std::optional<double> chance_rf;
    /// Bootstrap mean and standard deviation, keyed like `to_map()`.
    std::map<std::string, std::pair<double, double>> bootstrap;

    /// Flat name -> value view, e.g. "knn_nsc_1", "silhouette", "domain_acc_logreg".
    std::map<std::string, double> to_map() const;
};

nlohmann::json to_json(const MetricReport& report);

struct ReportOptions {
    bool knn = true;
    bool silhouette = true;
    /// Domain metrics are computed on the negative control, which must span two or more domains.
    bool domain_logreg = true;
    bool domain_rf = true;
    bool chance = true;
    std::uint64_t seed = 0;
    DomainClassificationOptions classification;
};

MetricReport evaluate_report(const EmbeddingTable& table, const ReportOptions& options = {});

/// Projection of the points onto their first two principal components (n x 2).
Eigen::MatrixXd pca_coordinates(const std::vector<TreatmentPoint>& points);

}

#endif
