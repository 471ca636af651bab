#ifndef WDN_OT_ORACLE_HPP
#define WDN_OT_ORACLE_HPP

#include <vector>

#include <Eigen/Dense>

/**
 * @file ot_oracle.hpp
 * @brief Exact Wasserstein-1 distances between equal-size uniform empirical distributions.
 */

namespace wdn {

/// Uniformly weighted points, one per row.
struct PointCloud {
    Eigen::MatrixXd points;

    Eigen::Index size() const {
        return points.rows();
    }
};

/// Largest cloud accepted by `exact_w1_assignment()`.
inline constexpr Eigen::Index assignment_size_cap = 512;

/// Mean absolute difference of the sorted samples; sizes must match and be nonzero.
double exact_w1_1d(std::vector<double> xs, std::vector<double> ys);

/**
 * Minimum over perfect matchings of the mean Euclidean distance, solved exactly with the
 * Hungarian algorithm. Sizes must match, be nonzero and not exceed `assignment_size_cap`.
 */
double exact_w1_assignment(const PointCloud& a, const PointCloud& b);

/**
 * Minimum-cost perfect matching for a square cost matrix.
 * Returns `assignment[row] = column`.
 */
std::vector<Eigen::Index> hungarian(const Eigen::MatrixXd& cost);

}

#endif
