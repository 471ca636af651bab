#ifndef WDN_LINALG_HPP
#define WDN_LINALG_HPP

#include <Eigen/Dense>

/**
 * @file linalg.hpp
 * @brief Dense symmetric eigenproblems, PSD matrix powers and PCA.
 */

namespace wdn {

/**
 * Full eigendecomposition of a symmetric matrix.
 * Eigenvalues are sorted in descending order and `eigenvectors.col(i)` pairs with `eigenvalues[i]`.
 */
struct SymEig {
    Eigen::VectorXd eigenvalues;
    Eigen::MatrixXd eigenvectors;
};

struct JacobiOptions {
    /// Stop once the off-diagonal Frobenius norm falls below `tolerance * ||A||_F`.
    double tolerance = 1e-12;
    int max_sweeps = 100;
    /// Maximum absolute asymmetry accepted on input.
    double symmetry_tolerance = 1e-10;
};

/**
 * Cyclic Jacobi eigensolver.
 * Throws `NumericalError` if `A` is not square/symmetric or the sweep cap is hit.
 */
SymEig sym_eig(const Eigen::MatrixXd& A, const JacobiOptions& options = {});

/**
 * `Q (L + eps)^p Q^T` for a symmetric PSD matrix, where `p` is 1/2 or -1/2.
 * Eigenvalues in [-1e-8, 0) are clamped to zero before the ridge is added.
 * Throws `NumericalError` on clearly negative eigenvalues or a singular inverse root.
 */
Eigen::MatrixXd psd_power(const Eigen::MatrixXd& A, double p, double eps = 0);

/// Sample covariance of the rows of `X` with 1/(N-1) normalization.
Eigen::MatrixXd covariance(const Eigen::MatrixXd& X);

struct PcaFit {
    Eigen::VectorXd mean;
    SymEig eig;
};

/// Mean and covariance eigendecomposition of the rows of `X`; needs at least two rows.
PcaFit pca_fit(const Eigen::MatrixXd& X);

}

#endif
