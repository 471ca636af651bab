#ifndef WDN_PREPROCESS_HPP
#define WDN_PREPROCESS_HPP

#include <map>
#include <string>

#include <Eigen/Dense>

#include "wdn/data_model.hpp"

/**
 * @file preprocess.hpp
 * @brief Embedding preparation: control whitening, per-plate percentile scaling and PCA reduction.
 */

namespace wdn {

/**
 * Affine whitening map `x -> whitener * (x - mean)`, fit so that negative controls
 * end up with zero mean and identity covariance.
 */
struct TvnTransform {
    Eigen::VectorXd mean;
    Eigen::MatrixXd whitener;

    Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
        return whitener * (x - mean);
    }

    static TvnTransform identity(Eigen::Index dim) {
        return {Eigen::VectorXd::Zero(dim), Eigen::MatrixXd::Identity(dim, dim)};
    }
};

/// Smallest control-covariance eigenvalue accepted by `tvn_fit()`.
inline constexpr double tvn_singular_threshold = 1e-8;

/**
 * Fit the whitening map on the negative-control rows of `table`.
 * The whitener is `L^{-1/2} Q^T` in the PCA basis of the controls.
 * Needs at least `dim + 1` controls; throws `NumericalError` for a singular control covariance.
 */
TvnTransform tvn_fit(const EmbeddingTable& table);

/// Map every row through `t`; metadata is copied unchanged.
EmbeddingTable tvn_apply(const TvnTransform& t, const EmbeddingTable& table);

/// Per-plate 1st and 99th percentiles of negative-control values, per coordinate.
struct PercentileScaler {
    struct Anchors {
        Eigen::VectorXd p01;
        Eigen::VectorXd p99;
    };
    std::map<std::string, Anchors> plates;
};

/// Percentile with linear interpolation between order statistics; `q` in [0, 1].
double interpolated_percentile(std::vector<double> values, double q);

/// Requires at least two controls per plate that appears in the table.
PercentileScaler percentile_fit(const EmbeddingTable& table);

/**
 * `x -> (x - p01) / (p99 - p01)` per plate and coordinate; coordinates with `p99 == p01` map to 0.
 * Throws `DataError` for rows on a plate the scaler has not seen.
 */
EmbeddingTable percentile_apply(const PercentileScaler& scaler, const EmbeddingTable& table);

/// Fit-and-apply convenience over the same table.
EmbeddingTable percentile_scale(const EmbeddingTable& table);

/// Projection onto the top principal components: `y = components * (x - mean)`.
struct PcaProjection {
    Eigen::VectorXd mean;
    Eigen::MatrixXd components; // k x dim, rows are unit eigenvectors
};

PcaProjection reduce_dim_fit(const EmbeddingTable& table, Eigen::Index k);

EmbeddingTable reduce_dim_apply(const PcaProjection& projection, const EmbeddingTable& table);

/// Fit on all rows and project to `k` dimensions.
EmbeddingTable reduce_dim(const EmbeddingTable& table, Eigen::Index k);

}

#endif
