#ifndef WDN_CORAL_HPP
#define WDN_CORAL_HPP

#include <map>
#include <string>

#include <Eigen/Dense>

#include "wdn/data_model.hpp"

/**
 * @file coral.hpp
 * @brief Correlation alignment of negative-control covariances across domains.
 *
 * Rows are treated as row vectors: an embedding `x` from domain `d` becomes
 * `x * R_d^{-1/2} R^{1/2}`, with `R_d = C_d + eta I` and `R = C + eta I`.
 * The target covariance `C` is fixed to the identity.
 */

namespace wdn {

struct CoralTransform {
    /// Per-domain right-multiplication matrix `R_d^{-1/2} R^{1/2}`.
    std::map<std::string, Eigen::MatrixXd> matrices;
    double eta = 1.0;
    bool target_cov_identity = true;
};

/// Needs at least two negative controls in every domain of `table`.
CoralTransform coral_fit(const EmbeddingTable& table, double eta = 1.0);

/// Throws `DataError` for a row whose domain has no fitted matrix.
EmbeddingTable coral_apply(const CoralTransform& t, const EmbeddingTable& table);

/// Covariance of domain-`d` controls after alignment, `A^T C_d A` for the fitted `A`.
Eigen::MatrixXd coral_aligned_covariance(const Eigen::MatrixXd& control_covariance, const Eigen::MatrixXd& matrix);

}

#endif
