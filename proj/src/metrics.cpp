#include "wdn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "wdn/errors.hpp"
#include "wdn/linalg.hpp"
#include "wdn/parallel.hpp"
#include "wdn/random.hpp"

namespace wdn {

std::vector<TreatmentPoint> treatment_means(const EmbeddingTable& table) {
    std::vector<TreatmentPoint> out;
    for (const auto& [key, rows] : group_index(table)) {
        const auto& first = table.records[rows.front()];
        if (first.compound == table.negative_control_compound) {
            continue;
        }
        TreatmentPoint point;
        point.treatment = key.first;
        point.domain = key.second;
        point.compound = first.compound;
        point.mean_vector = Eigen::VectorXd::Zero(table.dim);
        for (auto r : rows) {
            const auto& rec = table.records[r];
            if (!rec.moa) {
                throw DataError("row '" + rec.row_id + "' (treatment " + rec.treatment + ") has no MOA");
            }
            point.mean_vector += rec.vector;
        }
        point.mean_vector /= static_cast<double>(rows.size());
        point.moa = *first.moa;
        out.push_back(std::move(point));
    }
    return out;
}

double cosine_distance(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    const double nx = x.norm();
    const double ny = y.norm();
    if (nx == 0 || ny == 0) {
        throw DataError("cosine distance is undefined for a zero vector");
    }
    return 1 - x.dot(y) / (nx * ny);
}

std::string to_string(NeighborFilter filter) {
    return filter == NeighborFilter::nsc ? "nsc" : "nsc_nsb";
}

std::string to_string(DomainClassifier classifier) {
    return classifier == DomainClassifier::logreg ? "logreg" : "rf";
}

namespace {

Eigen::MatrixXd cosine_matrix(const std::vector<TreatmentPoint>& points) {
    const auto n = static_cast<Eigen::Index>(points.size());
    Eigen::MatrixXd dist = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            dist(i, j) = dist(j, i) = cosine_distance(points[i].mean_vector, points[j].mean_vector);
        }
    }
    return dist;
}

bool eligible(const TreatmentPoint& query, const TreatmentPoint& candidate, NeighborFilter filter) {
    if (candidate.compound == query.compound) {
        return false;
    }
    return filter == NeighborFilter::nsc || candidate.domain != query.domain;
}

}

std::vector<double> knn_moa_scores(const std::vector<TreatmentPoint>& points, int k, NeighborFilter filter) {
    if (k < 1) {
        throw DataError("knn_moa: k must be positive");
    }
    const auto dist = cosine_matrix(points);
    std::vector<double> out(points.size());
    std::vector<std::pair<double, std::size_t>> candidates;
    for (std::size_t i = 0; i < points.size(); ++i) {
        candidates.clear();
        for (std::size_t j = 0; j < points.size(); ++j) {
            if (j != i && eligible(points[i], points[j], filter)) {
                candidates.emplace_back(dist(i, j), j);
            }
        }
        if (candidates.size() < static_cast<std::size_t>(k)) {
            throw DataError("knn_moa: point " + std::to_string(i) + " (" + points[i].treatment + " in " + points[i].domain + ") has " +
                std::to_string(candidates.size()) + " eligible neighbors, need " + std::to_string(k));
        }
        std::partial_sort(candidates.begin(), candidates.begin() + k, candidates.end());
        int same = 0;
        for (int c = 0; c < k; ++c) {
            same += points[candidates[c].second].moa == points[i].moa;
        }
        out[i] = static_cast<double>(same) / static_cast<double>(k);
    }
    return out;
}

double knn_moa(const std::vector<TreatmentPoint>& points, int k, NeighborFilter filter) {
    if (points.empty()) {
        throw DataError("knn_moa: no points");
    }
    auto scores = knn_moa_scores(points, k, filter);
    return 100.0 * std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
}

std::vector<double> silhouette_values(const std::vector<TreatmentPoint>& points) {
    std::map<std::string, int> cluster_ids;
    for (const auto& p : points) {
        cluster_ids.emplace(p.moa, 0);
    }
    if (cluster_ids.size() < 2) {
        throw DataError("silhouette: need at least two MOA clusters, found " + std::to_string(cluster_ids.size()));
    }
    int next = 0;
    for (auto& entry : cluster_ids) {
        entry.second = next++;
    }
    const int nclusters = next;
    std::vector<int> cluster(points.size());
    std::vector<int> sizes(nclusters, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        cluster[i] = cluster_ids[points[i].moa];
        ++sizes[cluster[i]];
    }

    const auto dist = cosine_matrix(points);
    std::vector<double> out(points.size(), 0.0);
    std::vector<double> sums(nclusters);
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (sizes[cluster[i]] == 1) {
            continue;
        }
        std::fill(sums.begin(), sums.end(), 0.0);
        for (std::size_t j = 0; j < points.size(); ++j) {
            if (j != i) {
                sums[cluster[j]] += dist(i, j);
            }
        }
        const double a = sums[cluster[i]] / static_cast<double>(sizes[cluster[i]] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (int c = 0; c < nclusters; ++c) {
            if (c != cluster[i]) {
                b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
            }
        }
        const double denom = std::max(a, b);
        out[i] = denom > 0 ? (b - a) / denom : 0.0;
    }
    return out;
}

double silhouette_moa(const std::vector<TreatmentPoint>& points) {
    auto values = silhouette_values(points);
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

EmbeddingTable restrict_to_treatment(const EmbeddingTable& table, const std::string& treatment) {
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < table.size(); ++r) {
        if (table.records[r].treatment == treatment) {
            rows.push_back(r);
        }
    }
    return table.subset(rows);
}

double domain_classification_accuracy(const EmbeddingTable& table, DomainClassifier classifier, std::uint64_t seed, const DomainClassificationOptions& options) {
    const int folds = options.folds;
    if (folds < 2) {
        throw DataError("domain classification: need at least 2 folds");
    }

    std::map<std::string, std::vector<std::size_t>> by_domain;
    for (std::size_t r = 0; r < table.size(); ++r) {
        by_domain[table.records[r].domain].push_back(r);
    }
    if (by_domain.size() < 2) {
        throw DataError("domain classification: treatment appears in " + std::to_string(by_domain.size()) + " domain(s), need at least 2");
    }

    Rng rng(seed);
    std::vector<int> labels(table.size());
    std::vector<int> fold_of(table.size());
    int label = 0;
    for (auto& [domain, rows] : by_domain) {
        if (rows.size() < static_cast<std::size_t>(folds)) {
            throw DataError("domain classification: domain '" + domain + "' has " + std::to_string(rows.size()) + " rows, need at least " + std::to_string(folds));
        }
        auto order = rows;
        shuffle(order, rng);
        for (std::size_t i = 0; i < order.size(); ++i) {
            labels[order[i]] = label;
            fold_of[order[i]] = static_cast<int>(i % folds);
        }
        ++label;
    }
    const int num_classes = label;
    const Eigen::MatrixXd X = table.matrix();

    double total = 0;
    for (int f = 0; f < folds; ++f) {
        std::vector<std::size_t> train_rows, test_rows;
        for (std::size_t r = 0; r < table.size(); ++r) {
            (fold_of[r] == f ? test_rows : train_rows).push_back(r);
        }
        Eigen::MatrixXd Xtrain(static_cast<Eigen::Index>(train_rows.size()), X.cols());
        std::vector<int> ytrain(train_rows.size());
        for (std::size_t i = 0; i < train_rows.size(); ++i) {
            Xtrain.row(i) = X.row(train_rows[i]);
            ytrain[i] = labels[train_rows[i]];
        }
        Eigen::MatrixXd Xtest(static_cast<Eigen::Index>(test_rows.size()), X.cols());
        for (std::size_t i = 0; i < test_rows.size(); ++i) {
            Xtest.row(i) = X.row(test_rows[i]);
        }

        std::vector<int> predicted;
        if (classifier == DomainClassifier::logreg) {
            LogisticRegression model(options.logreg);
            model.fit(Xtrain, ytrain, num_classes);
            predicted = model.predict(Xtest);
        } else {
            RandomForest model(options.forest);
            model.fit(Xtrain, ytrain, num_classes, child_seed(seed, static_cast<std::uint64_t>(f)));
            predicted = model.predict(Xtest);
        }

        std::size_t correct = 0;
        for (std::size_t i = 0; i < test_rows.size(); ++i) {
            correct += predicted[i] == labels[test_rows[i]];
        }
        total += static_cast<double>(correct) / static_cast<double>(test_rows.size());
    }
    return 100.0 * total / folds;
}

double chance_baseline(const EmbeddingTable& table, DomainClassifier classifier, std::uint64_t seed, const DomainClassificationOptions& options) {
    Rng rng(child_seed(seed, 0xC4A9CE));
    Eigen::MatrixXd noise(static_cast<Eigen::Index>(table.size()), table.dim);
    for (Eigen::Index r = 0; r < noise.rows(); ++r) {
        for (Eigen::Index c = 0; c < noise.cols(); ++c) {
            noise(r, c) = standard_normal(rng);
        }
    }
    return domain_classification_accuracy(table.with_vectors(noise), classifier, seed, options);
}

std::map<std::string, double> MetricReport::to_map() const {
    std::map<std::string, double> out;
    for (int k = 0; k < 4; ++k) {
        out["knn_nsc_" + std::to_string(k + 1)] = knn_nsc[k];
        out["knn_nsc_nsb_" + std::to_string(k + 1)] = knn_nsc_nsb[k];
    }
    out["silhouette"] = silhouette;
    if (domain_acc_logreg) {
        out["domain_acc_logreg"] = *domain_acc_logreg;
    }
    if (domain_acc_rf) {
        out["domain_acc_rf"] = *domain_acc_rf;
    }
    if (chance_logreg) {
        out["chance_logreg"] = *chance_logreg;
    }
    if (chance_rf) {
        out["chance_rf"] = *chance_rf;
    }
    return out;
}

nlohmann::json to_json(const MetricReport& report) {
    nlohmann::json doc;
    doc["knn_nsc"] = report.knn_nsc;
    doc["knn_nsc_nsb"] = report.knn_nsc_nsb;
    doc["silhouette"] = report.silhouette;
    auto optional_field = [&](const char* name, const std::optional<double>& value) {
        doc[name] = value ? nlohmann::json(*value) : nlohmann::json(nullptr);
    };
    optional_field("domain_acc_logreg", report.domain_acc_logreg);
    optional_field("domain_acc_rf", report.domain_acc_rf);
    optional_field("chance_logreg", report.chance_logreg);
    optional_field("chance_rf", report.chance_rf);
    if (!report.bootstrap.empty()) {
        nlohmann::json boot = nlohmann::json::object();
        for (const auto& [name, stat] : report.bootstrap) {
            boot[name] = {{"mean", stat.first}, {"std", stat.second}};
        }
        doc["bootstrap"] = std::move(boot);
    }
    return doc;
}

MetricReport evaluate_report(const EmbeddingTable& table, const ReportOptions& options) {
    MetricReport report;
    if (options.knn || options.silhouette) {
        auto points = treatment_means(table);
        if (options.knn) {
            for (int k = 1; k <= 4; ++k) {
                report.knn_nsc[k - 1] = knn_moa(points, k, NeighborFilter::nsc);
                report.knn_nsc_nsb[k - 1] = knn_moa(points, k, NeighborFilter::nsc_nsb);
            }
        }
        if (options.silhouette) {
            report.silhouette = silhouette_moa(points);
        }
    }

    if (options.domain_logreg || options.domain_rf) {
        std::string control_treatment;
        for (const auto& rep : replicated_treatments(table)) {
            if (rep.treatment.rfind(table.negative_control_compound + "@", 0) == 0) {
                control_treatment = rep.treatment;
                break;
            }
        }
        if (!control_treatment.empty()) {
            auto controls = restrict_to_treatment(table, control_treatment);
            if (options.domain_logreg) {
                report.domain_acc_logreg = domain_classification_accuracy(controls, DomainClassifier::logreg, options.seed, options.classification);
                if (options.chance) {
                    report.chance_logreg = chance_baseline(controls, DomainClassifier::logreg, options.seed, options.classification);
                }
            }
            if (options.domain_rf) {
                report.domain_acc_rf = domain_classification_accuracy(controls, DomainClassifier::rf, options.seed, options.classification);
                if (options.chance) {
                    report.chance_rf = chance_baseline(controls, DomainClassifier::rf, options.seed, options.classification);
                }
            }
        }
    }
    return report;
}

Eigen::MatrixXd pca_coordinates(const std::vector<TreatmentPoint>& points) {
    if (points.size() < 2) {
        throw DataError("pca_coordinates: need at least two points");
    }
    const Eigen::Index dim = points.front().mean_vector.size();
    Eigen::MatrixXd X(static_cast<Eigen::Index>(points.size()), dim);
    for (std::size_t i = 0; i < points.size(); ++i) {
        X.row(i) = points[i].mean_vector.transpose();
    }
    auto fit = pca_fit(X);
    const Eigen::Index k = std::min<Eigen::Index>(2, dim);
    Eigen::MatrixXd coords = Eigen::MatrixXd::Zero(X.rows(), 2);
    coords.leftCols(k) = (X.rowwise() - fit.mean.transpose()) * fit.eig.eigenvectors.leftCols(k);
    return coords;
}

}
