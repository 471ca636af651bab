#include "wdn/ot_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "wdn/errors.hpp"

namespace wdn {

double exact_w1_1d(std::vector<double> xs, std::vector<double> ys) {
    if (xs.size() != ys.size()) {
        throw DataError("exact_w1_1d: sample sizes differ (" + std::to_string(xs.size()) + " vs " + std::to_string(ys.size()) + ")");
    }
    if (xs.empty()) {
        throw DataError("exact_w1_1d: empty samples");
    }
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    double total = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        total += std::abs(xs[i] - ys[i]);
    }
    return total / static_cast<double>(xs.size());
}

std::vector<Eigen::Index> hungarian(const Eigen::MatrixXd& cost) {
    const Eigen::Index n = cost.rows();
    if (cost.cols() != n) {
        throw DataError("hungarian: cost matrix must be square");
    }
    // Shortest augmenting paths with row/column potentials, 1-based with a virtual column 0.
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0), v(n + 1, 0);
    std::vector<Eigen::Index> match(n + 1, 0), way(n + 1, 0);
    for (Eigen::Index i = 1; i <= n; ++i) {
        match[0] = i;
        Eigen::Index j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const Eigen::Index i0 = match[j0];
            double delta = inf;
            Eigen::Index j1 = 0;
            for (Eigen::Index j = 1; j <= n; ++j) {
                if (used[j]) {
                    continue;
                }
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (Eigen::Index j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const Eigen::Index j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<Eigen::Index> assignment(n);
    for (Eigen::Index j = 1; j <= n; ++j) {
        assignment[match[j] - 1] = j - 1;
    }
    return assignment;
}

double exact_w1_assignment(const PointCloud& a, const PointCloud& b) {
    const Eigen::Index n = a.size();
    if (n != b.size()) {
        throw DataError("exact_w1_assignment: cloud sizes differ (" + std::to_string(n) + " vs " + std::to_string(b.size()) + ")");
    }
    if (n == 0) {
        throw DataError("exact_w1_assignment: empty clouds");
    }
    if (n > assignment_size_cap) {
        throw DataError("exact_w1_assignment: cloud size " + std::to_string(n) + " exceeds cap " + std::to_string(assignment_size_cap));
    }
    if (a.points.cols() != b.points.cols()) {
        throw DataError("exact_w1_assignment: clouds differ in dimension");
    }

    Eigen::MatrixXd cost(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            cost(i, j) = (a.points.row(i) - b.points.row(j)).norm();
        }
    }
    auto assignment = hungarian(cost);
    double total = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        total += cost(i, assignment[i]);
    }
    return total / static_cast<double>(n);
}

}
