#include "doctest.h"

#include "support.hpp"
#include "wdn/errors.hpp"
#include "wdn/linalg.hpp"
#include "wdn/preprocess.hpp"

using namespace wdn;
using Eigen::MatrixXd;

namespace {

EmbeddingTable controls_and_treated(Rng& rng, const MatrixXd& controls, Eigen::Index treated = 10) {
    EmbeddingTable t;
    testing::add_rows(t, "A", "DMSO", controls, std::nullopt, "P1", 3, "0");
    testing::add_rows(t, "A", "X", testing::normal_matrix(rng, treated, controls.cols(), 2.0), "m", "P1", 2);
    return t;
}

void check_whitened(const EmbeddingTable& t) {
    const MatrixXd c = t.matrix(t.control_rows());
    CHECK(c.colwise().mean().cwiseAbs().maxCoeff() < 1e-8);
    CHECK((covariance(c) - MatrixXd::Identity(t.dim, t.dim)).norm() < 1e-6);
}

}

TEST_CASE("tvn on standard normal controls is nearly a rotation") {
    Rng rng(21);
    auto t = controls_and_treated(rng, testing::normal_matrix(rng, 20000, 4));
    auto fit = tvn_fit(t);
    const MatrixXd gram = fit.whitener * fit.whitener.transpose();
    CHECK((gram - MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("tvn whitens shifted anisotropic controls") {
    Rng rng(22);
    MatrixXd c = testing::normal_matrix(rng, 500, 2);
    c.col(0) = c.col(0) * 2.0 + Eigen::VectorXd::Constant(500, 3.0);
    auto t = controls_and_treated(rng, c);
    auto out = tvn_apply(tvn_fit(t), t);
    check_whitened(out);
    for (std::size_t i = 0; i < t.size(); ++i) {
        CHECK(out.records[i].row_id == t.records[i].row_id);
        CHECK(out.records[i].treatment == t.records[i].treatment);
    }
}

TEST_CASE("tvn preconditions") {
    Rng rng(23);
    CHECK_THROWS_AS(tvn_fit(controls_and_treated(rng, testing::normal_matrix(rng, 1, 3))), DataError);
    MatrixXd flat = testing::normal_matrix(rng, 50, 3);
    flat.col(2).setConstant(1.0);
    CHECK_THROWS_AS(tvn_fit(controls_and_treated(rng, flat)), NumericalError);
    auto t = controls_and_treated(rng, testing::normal_matrix(rng, 50, 3));
    CHECK_THROWS_AS(tvn_apply(TvnTransform::identity(2), t), DataError);
}

TEST_CASE("tvn identity leaves the table unchanged") {
    Rng rng(24);
    auto t = controls_and_treated(rng, testing::normal_matrix(rng, 30, 3));
    auto out = tvn_apply(TvnTransform::identity(3), t);
    CHECK(out.matrix() == t.matrix());
}

TEST_CASE("tvn maps distances through the affine map") {
    Rng rng(25);
    auto t = controls_and_treated(rng, testing::normal_matrix(rng, 100, 3) * testing::normal_matrix(rng, 3, 3));
    auto fit = tvn_fit(t);
    auto out = tvn_apply(fit, t);
    for (std::size_t i = 100; i + 1 < t.size(); ++i) {
        const double direct = (out.records[i].vector - out.records[i + 1].vector).norm();
        const double mapped = (fit.whitener * (t.records[i].vector - t.records[i + 1].vector)).norm();
        CHECK(direct == doctest::Approx(mapped).epsilon(1e-12));
    }
}

TEST_CASE("tvn refit after tvn is still white") {
    Rng rng(26);
    for (int trial = 0; trial < 5; ++trial) {
        auto t = controls_and_treated(rng, testing::normal_matrix(rng, 80, 5) * testing::normal_matrix(rng, 5, 5));
        auto once = tvn_apply(tvn_fit(t), t);
        check_whitened(tvn_apply(tvn_fit(once), once));
    }
}

TEST_CASE("interpolated percentile") {
    std::vector<double> v = {4, 1, 3, 2};
    CHECK(interpolated_percentile(v, 0.0) == 1);
    CHECK(interpolated_percentile(v, 1.0) == 4);
    CHECK(interpolated_percentile(v, 0.5) == doctest::Approx(2.5));
    CHECK(interpolated_percentile({7}, 0.3) == 7);
}

TEST_CASE("percentile scaling of uniform controls") {
    MatrixXd c(10001, 1);
    for (int i = 0; i <= 10000; ++i) {
        c(i, 0) = i / 10000.0;
    }
    EmbeddingTable t;
    testing::add_rows(t, "A", "DMSO", c, std::nullopt, "P", 1, "0");
    testing::add_rows(t, "A", "X", MatrixXd::Constant(1, 1, 0.5), "m", "P");
    auto scaler = percentile_fit(t);
    CHECK(scaler.plates.at("P").p01[0] == doctest::Approx(0.01));
    CHECK(scaler.plates.at("P").p99[0] == doctest::Approx(0.99));
    auto out = percentile_apply(scaler, t);
    CHECK(out.records.back().vector[0] == doctest::Approx(0.49 / 0.98));
    CHECK(out.records[100].vector[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(out.records[9900].vector[0] == doctest::Approx(1.0));
}

TEST_CASE("percentile scaling edge cases") {
    Rng rng(27);
    MatrixXd c = testing::normal_matrix(rng, 20, 2);
    c.col(1).setConstant(4.0);
    EmbeddingTable t;
    testing::add_rows(t, "A", "DMSO", c, std::nullopt, "P", 1, "0");
    testing::add_rows(t, "A", "X", testing::normal_matrix(rng, 5, 2), "m", "P");
    auto out = percentile_scale(t);
    for (const auto& r : out.records) {
        CHECK(r.vector[1] == 0.0);
    }

    EmbeddingTable orphan = t;
    testing::add_rows(orphan, "A", "X", testing::normal_matrix(rng, 2, 2), "m", "Q");
    CHECK_THROWS_AS(percentile_scale(orphan), DataError);
}

TEST_CASE("percentile scaling is invariant under per-plate shifts") {
    Rng rng(28);
    EmbeddingTable t;
    for (const char* plate : {"P1", "P2"}) {
        testing::add_rows(t, plate, "DMSO", testing::normal_matrix(rng, 40, 3), std::nullopt, plate, 2, "0");
        testing::add_rows(t, plate, std::string("X") + plate, testing::normal_matrix(rng, 10, 3), "m", plate);
    }
    auto shifted = t;
    for (auto& r : shifted.records) {
        r.vector.array() += r.plate == "P1" ? 12.5 : -3.0;
    }
    CHECK((percentile_scale(t).matrix() - percentile_scale(shifted).matrix()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("reduce_dim") {
    Rng rng(29);
    EmbeddingTable t;
    testing::add_rows(t, "A", "X", testing::normal_matrix(rng, 200, 8) * testing::normal_matrix(rng, 8, 8), "m");
    const double total = covariance(t.matrix()).trace();

    auto full = reduce_dim(t, 8);
    CHECK(full.dim == 8);
    CHECK(covariance(full.matrix()).trace() == doctest::Approx(total).epsilon(1e-8));

    auto five = reduce_dim(t, 5);
    const MatrixXd cov5 = covariance(five.matrix());
    const auto eig = pca_fit(t.matrix()).eig;
    CHECK(cov5.trace() == doctest::Approx(eig.eigenvalues.head(5).sum()).epsilon(1e-10));
    const MatrixXd off = cov5 - MatrixXd(cov5.diagonal().asDiagonal());
    CHECK(off.cwiseAbs().maxCoeff() < 1e-8 * cov5.trace());

    CHECK_THROWS_AS(reduce_dim(t, 9), DataError);
}

TEST_CASE("reduce_dim of rank-one data loses nothing") {
    Rng rng(30);
    const Eigen::VectorXd dir = testing::normal_matrix(rng, 4, 1).col(0);
    const MatrixXd X = testing::normal_matrix(rng, 30, 1) * dir.transpose();
    EmbeddingTable t;
    testing::add_rows(t, "A", "X", X, "m");
    auto proj = reduce_dim_fit(t, 1);
    auto out = reduce_dim_apply(proj, t);
    for (std::size_t i = 0; i < t.size(); ++i) {
        const Eigen::VectorXd back = proj.mean + proj.components.transpose() * out.records[i].vector;
        CHECK((back - t.records[i].vector).norm() < 1e-8);
    }
}
