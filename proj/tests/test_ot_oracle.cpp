#include <algorithm>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "support.hpp"
#include "wdn/errors.hpp"
#include "wdn/ot_oracle.hpp"

using namespace wdn;
using Eigen::MatrixXd;

namespace {

double brute_force_w1(const MatrixXd& a, const MatrixXd& b) {
    std::vector<Eigen::Index> perm(a.rows());
    std::iota(perm.begin(), perm.end(), 0);
    double best = 1e300;
    do {
        double total = 0;
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
            total += (a.row(i) - b.row(perm[i])).norm();
        }
        best = std::min(best, total / a.rows());
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

PointCloud cloud(const MatrixXd& m) {
    return PointCloud{m};
}

}

TEST_CASE("exact_w1_1d examples") {
    CHECK(exact_w1_1d({0, 0}, {1, 1}) == 1.0);
    CHECK(exact_w1_1d({3, 1, 2}, {2, 3, 1}) == 0.0);
    CHECK(exact_w1_1d({0, 10}, {1, 11}) == 1.0);
    CHECK(exact_w1_1d({0, 1, 2, 3}, {0, 1, 2, 7}) == doctest::Approx(1.0));
    CHECK_THROWS_AS(exact_w1_1d({}, {}), DataError);
    CHECK_THROWS_AS(exact_w1_1d({1, 2}, {1}), DataError);
}

TEST_CASE("exact_w1_assignment examples") {
    Rng rng(1);
    MatrixXd a = testing::normal_matrix(rng, 7, 3);
    MatrixXd shuffled(7, 3);
    const std::vector<int> order{4, 0, 6, 2, 1, 5, 3};
    for (int i = 0; i < 7; ++i) {
        shuffled.row(i) = a.row(order[i]);
    }
    CHECK(exact_w1_assignment(cloud(a), cloud(shuffled)) < 1e-12);

    for (int trial = 0; trial < 10; ++trial) {
        MatrixXd x = testing::normal_matrix(rng, 40, 1);
        MatrixXd y = testing::normal_matrix(rng, 40, 1, 2.0, 0.5);
        std::vector<double> xs(x.data(), x.data() + 40);
        std::vector<double> ys(y.data(), y.data() + 40);
        CHECK(std::abs(exact_w1_assignment(cloud(x), cloud(y)) - exact_w1_1d(xs, ys)) < 1e-10);
    }

    MatrixXd p(3, 2), q(3, 2);
    p << 0, 0, 1, 0, 0, 1;
    q << 5, 5, -1, 2, 3, -2;
    CHECK(exact_w1_assignment(cloud(p), cloud(q)) == doctest::Approx(brute_force_w1(p, q)).epsilon(1e-14));
}

TEST_CASE("exact_w1_assignment agrees with permutation enumeration") {
    Rng rng(2);
    for (int n = 1; n <= 8; ++n) {
        for (int trial = 0; trial < 4; ++trial) {
            const int dim = 1 + trial % 3;
            MatrixXd a = testing::normal_matrix(rng, n, dim);
            MatrixXd b = testing::normal_matrix(rng, n, dim, 1.5, 0.3);
            CHECK(std::abs(exact_w1_assignment(cloud(a), cloud(b)) - brute_force_w1(a, b)) < 1e-12);
        }
    }
}

TEST_CASE("hungarian returns a minimum-cost permutation") {
    MatrixXd cost(3, 3);
    cost << 4, 1, 3,
            2, 0, 5,
            3, 2, 2;
    auto assignment = hungarian(cost);
    std::vector<Eigen::Index> sorted = assignment;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == std::vector<Eigen::Index>{0, 1, 2});
    double total = 0;
    for (int i = 0; i < 3; ++i) {
        total += cost(i, assignment[i]);
    }
    CHECK(total == 5.0);
}

TEST_CASE("W1 symmetry, triangle inequality and translation") {
    Rng rng(3);
    for (int trial = 0; trial < 15; ++trial) {
        const int n = 5 + trial * 3;
        MatrixXd a = testing::normal_matrix(rng, n, 4);
        MatrixXd b = testing::normal_matrix(rng, n, 4, 1.0, 1.0);
        MatrixXd c = testing::normal_matrix(rng, n, 4, 2.0, -0.5);
        const double ab = exact_w1_assignment(cloud(a), cloud(b));
        const double ba = exact_w1_assignment(cloud(b), cloud(a));
        const double bc = exact_w1_assignment(cloud(b), cloud(c));
        const double ac = exact_w1_assignment(cloud(a), cloud(c));
        CHECK(std::abs(ab - ba) < 1e-12);
        CHECK(ac <= ab + bc + 1e-9);

        Eigen::RowVectorXd v = testing::normal_matrix(rng, 1, 4, 3.0).row(0);
        MatrixXd av = a.rowwise() + v;
        MatrixXd bv = b.rowwise() + v;
        CHECK(std::abs(exact_w1_assignment(cloud(av), cloud(bv)) - ab) < 1e-10);
        CHECK(std::abs(exact_w1_assignment(cloud(a), cloud(av)) - v.norm()) < 1e-10);
    }
}

TEST_CASE("exact_w1_assignment rejects bad sizes") {
    CHECK_THROWS_AS(exact_w1_assignment(cloud(MatrixXd::Zero(3, 2)), cloud(MatrixXd::Zero(4, 2))), DataError);
    CHECK_THROWS_AS(exact_w1_assignment(cloud(MatrixXd::Zero(0, 2)), cloud(MatrixXd::Zero(0, 2))), DataError);
    CHECK_THROWS_AS(exact_w1_assignment(cloud(MatrixXd::Zero(3, 2)), cloud(MatrixXd::Zero(3, 3))), DataError);
    const auto big = assignment_size_cap + 1;
    CHECK_THROWS_AS(exact_w1_assignment(cloud(MatrixXd::Zero(big, 1)), cloud(MatrixXd::Zero(big, 1))), DataError);
}
