#include "wdn/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "wdn/errors.hpp"

namespace wdn {

namespace {

constexpr double clamp_tolerance = 1e-8;

double off_diagonal_norm(const Eigen::MatrixXd& A) {
    double total = 0;
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
        for (Eigen::Index i = 0; i < A.rows(); ++i) {
            if (i != j) {
                total += A(i, j) * A(i, j);
            }
        }
    }
    return std::sqrt(total);
}

}

SymEig sym_eig(const Eigen::MatrixXd& input, const JacobiOptions& options) {
    if (input.rows() != input.cols()) {
        throw NumericalError("sym_eig: matrix is not square");
    }
    const Eigen::Index n = input.rows();
    if (n > 0 && (input - input.transpose()).cwiseAbs().maxCoeff() > options.symmetry_tolerance) {
        throw NumericalError("sym_eig: matrix is not symmetric");
    }
    if (!input.allFinite()) {
        throw NumericalError("sym_eig: matrix has non-finite entries");
    }

    Eigen::MatrixXd A = 0.5 * (input + input.transpose());
    Eigen::MatrixXd V = Eigen::MatrixXd::Identity(n, n);
    const double scale = A.norm();
    const double threshold = options.tolerance * (scale > 0 ? scale : 1.0);

    bool converged = off_diagonal_norm(A) <= threshold;
    for (int sweep = 0; sweep < options.max_sweeps && !converged; ++sweep) {
        for (Eigen::Index p = 0; p + 1 < n; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                const double apq = A(p, q);
                if (apq == 0) {
                    continue;
                }
                // Rotation angle that annihilates A(p, q) (Golub & Van Loan, 8.5.2).
                const double theta = (A(q, q) - A(p, p)) / (2 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
                const double c = 1 / std::sqrt(t * t + 1);
                const double s = t * c;

                for (Eigen::Index k = 0; k < n; ++k) {
                    const double akp = A(k, p);
                    const double akq = A(k, q);
                    A(k, p) = c * akp - s * akq;
                    A(k, q) = s * akp + c * akq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double apk = A(p, k);
                    const double aqk = A(q, k);
                    A(p, k) = c * apk - s * aqk;
                    A(q, k) = s * apk + c * aqk;
                }
                A(p, q) = 0;
                A(q, p) = 0;

                for (Eigen::Index k = 0; k < n; ++k) {
                    const double vkp = V(k, p);
                    const double vkq = V(k, q);
                    V(k, p) = c * vkp - s * vkq;
                    V(k, q) = s * vkp + c * vkq;
                }
            }
        }
        converged = off_diagonal_norm(A) <= threshold;
    }
    if (!converged) {
        throw NumericalError("sym_eig: no convergence after " + std::to_string(options.max_sweeps) + " sweeps");
    }

    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return A(a, a) > A(b, b); });

    SymEig out;
    out.eigenvalues.resize(n);
    out.eigenvectors.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        out.eigenvalues[i] = A(order[i], order[i]);
        out.eigenvectors.col(i) = V.col(order[i]);
    }
    return out;
}

Eigen::MatrixXd psd_power(const Eigen::MatrixXd& A, double p, double eps) {
    if (p != 0.5 && p != -0.5) {
        throw NumericalError("psd_power: exponent must be 1/2 or -1/2");
    }
    auto eig = sym_eig(A);
    Eigen::VectorXd powered(eig.eigenvalues.size());
    for (Eigen::Index i = 0; i < eig.eigenvalues.size(); ++i) {
        double value = eig.eigenvalues[i];
        if (value < 0) {
            if (value < -clamp_tolerance) {
                throw NumericalError("psd_power: negative eigenvalue " + std::to_string(value));
            }
            value = 0;
        }
        value += eps;
        if (p < 0) {
            if (value <= 0) {
                throw NumericalError("psd_power: singular matrix has no inverse square root");
            }
            powered[i] = 1 / std::sqrt(value);
        } else {
            powered[i] = std::sqrt(value);
        }
    }
    Eigen::MatrixXd out = eig.eigenvectors * powered.asDiagonal() * eig.eigenvectors.transpose();
    return 0.5 * (out + out.transpose());
}

Eigen::MatrixXd covariance(const Eigen::MatrixXd& X) {
    if (X.rows() < 2) {
        throw DataError("covariance: need at least 2 rows");
    }
    Eigen::RowVectorXd mean = X.colwise().mean();
    Eigen::MatrixXd centered = X.rowwise() - mean;
    Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(X.rows() - 1);
    return 0.5 * (cov + cov.transpose());
}

PcaFit pca_fit(const Eigen::MatrixXd& X) {
    if (X.rows() < 2) {
        throw DataError("pca_fit: need at least 2 rows, got " + std::to_string(X.rows()));
    }
    PcaFit out;
    out.mean = X.colwise().mean().transpose();
    out.eig = sym_eig(covariance(X));
    return out;
}

}
