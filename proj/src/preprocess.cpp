#include "wdn/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "wdn/errors.hpp"
#include "wdn/linalg.hpp"

namespace wdn {

TvnTransform tvn_fit(const EmbeddingTable& table) {
    auto controls = table.control_rows();
    if (static_cast<Eigen::Index>(controls.size()) < table.dim + 1) {
        throw DataError("tvn_fit: need at least " + std::to_string(table.dim + 1) + " negative-control rows, found " + std::to_string(controls.size()));
    }
    auto fit = pca_fit(table.matrix(controls));
    const auto& values = fit.eig.eigenvalues;
    if (values.minCoeff() < tvn_singular_threshold) {
        throw NumericalError("tvn_fit: control covariance is singular (smallest eigenvalue " + std::to_string(values.minCoeff()) + ")");
    }

    TvnTransform out;
    out.mean = fit.mean;
    out.whitener = values.cwiseSqrt().cwiseInverse().asDiagonal() * fit.eig.eigenvectors.transpose();
    return out;
}

EmbeddingTable tvn_apply(const TvnTransform& t, const EmbeddingTable& table) {
    if (t.mean.size() != table.dim || t.whitener.cols() != table.dim) {
        throw DataError("tvn_apply: transform dimension " + std::to_string(t.mean.size()) + " does not match table dimension " + std::to_string(table.dim));
    }
    Eigen::MatrixXd X = table.matrix();
    Eigen::MatrixXd out = (X.rowwise() - t.mean.transpose()) * t.whitener.transpose();
    return table.with_vectors(out);
}

double interpolated_percentile(std::vector<double> values, double q) {
    if (values.empty()) {
        throw DataError("percentile of empty set");
    }
    std::sort(values.begin(), values.end());
    const double h = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= values.size()) {
        return values.back();
    }
    const double frac = h - static_cast<double>(lo);
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

PercentileScaler percentile_fit(const EmbeddingTable& table) {
    std::map<std::string, std::vector<std::size_t>> controls_by_plate;
    for (std::size_t r = 0; r < table.size(); ++r) {
        controls_by_plate[table.records[r].plate];
        if (table.is_control(r)) {
            controls_by_plate[table.records[r].plate].push_back(r);
        }
    }

    PercentileScaler scaler;
    for (const auto& [plate, rows] : controls_by_plate) {
        if (rows.size() < 2) {
            throw DataError("percentile_fit: plate '" + plate + "' has " + std::to_string(rows.size()) + " negative-control rows, need at least 2");
        }
        PercentileScaler::Anchors anchors{Eigen::VectorXd(table.dim), Eigen::VectorXd(table.dim)};
        std::vector<double> column(rows.size());
        for (Eigen::Index c = 0; c < table.dim; ++c) {
            for (std::size_t i = 0; i < rows.size(); ++i) {
                column[i] = table.records[rows[i]].vector[c];
            }
            anchors.p01[c] = interpolated_percentile(column, 0.01);
            anchors.p99[c] = interpolated_percentile(column, 0.99);
        }
        scaler.plates.emplace(plate, std::move(anchors));
    }
    return scaler;
}

EmbeddingTable percentile_apply(const PercentileScaler& scaler, const EmbeddingTable& table) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(table.size()), table.dim);
    for (std::size_t r = 0; r < table.size(); ++r) {
        const auto& rec = table.records[r];
        auto it = scaler.plates.find(rec.plate);
        if (it == scaler.plates.end()) {
            throw DataError("percentile_apply: no negative controls fitted for plate '" + rec.plate + "'");
        }
        const auto& anchors = it->second;
        if (anchors.p01.size() != table.dim) {
            throw DataError("percentile_apply: scaler dimension does not match table");
        }
        for (Eigen::Index c = 0; c < table.dim; ++c) {
            const double range = anchors.p99[c] - anchors.p01[c];
            out(r, c) = range > 0 ? (rec.vector[c] - anchors.p01[c]) / range : 0.0;
        }
    }
    return table.with_vectors(out);
}

EmbeddingTable percentile_scale(const EmbeddingTable& table) {
    return percentile_apply(percentile_fit(table), table);
}

PcaProjection reduce_dim_fit(const EmbeddingTable& table, Eigen::Index k) {
    if (k <= 0 || k > table.dim) {
        throw DataError("reduce_dim: target dimension " + std::to_string(k) + " outside [1, " + std::to_string(table.dim) + "]");
    }
    if (static_cast<Eigen::Index>(table.size()) < k + 1) {
        throw DataError("reduce_dim: need at least " + std::to_string(k + 1) + " rows");
    }
    auto fit = pca_fit(table.matrix());
    PcaProjection out;
    out.mean = fit.mean;
    out.components = fit.eig.eigenvectors.leftCols(k).transpose();
    return out;
}

EmbeddingTable reduce_dim_apply(const PcaProjection& projection, const EmbeddingTable& table) {
    if (projection.mean.size() != table.dim) {
        throw DataError("reduce_dim_apply: projection dimension does not match table");
    }
    Eigen::MatrixXd X = table.matrix();
    Eigen::MatrixXd out = (X.rowwise() - projection.mean.transpose()) * projection.components.transpose();
    return table.with_vectors(out);
}

EmbeddingTable reduce_dim(const EmbeddingTable& table, Eigen::Index k) {
    return reduce_dim_apply(reduce_dim_fit(table, k), table);
}

}
