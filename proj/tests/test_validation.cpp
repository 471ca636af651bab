#include <map>
#include <set>
#include <vector>

#include "doctest.h"
#include "support.hpp"
#include "wdn/errors.hpp"
#include "wdn/metrics.hpp"
#include "wdn/validation.hpp"

using namespace wdn;
using Eigen::MatrixXd;

namespace {

// Compounds C0..C(n-1) with MOA M(c % moas) in each domain, plus controls.
EmbeddingTable moa_table(Rng& rng, int compounds, int moas, int domains, int rows, int wells, double noise) {
    EmbeddingTable t;
    std::vector<Eigen::RowVectorXd> centres;
    for (int m = 0; m < moas; ++m) {
        centres.push_back(testing::normal_matrix(rng, 1, 4, 3.0).row(0));
    }
    for (int d = 0; d < domains; ++d) {
        const std::string domain = "D" + std::to_string(d);
        testing::add_rows(t, domain, "DMSO", testing::normal_matrix(rng, rows, 4), std::nullopt, "", wells, "0");
        for (int c = 0; c < compounds; ++c) {
            MatrixXd values = testing::normal_matrix(rng, rows, 4, noise);
            values.rowwise() += centres[c % moas];
            testing::add_rows(t, domain, "C" + std::to_string(c), values, "M" + std::to_string(c % moas), "", wells);
        }
    }
    return t;
}

std::vector<std::vector<TreatmentPoint>> points_of(const std::vector<StepTable>& series) {
    std::vector<std::vector<TreatmentPoint>> out;
    for (const auto& s : series) out.push_back(treatment_means(s.table));
    return out;
}

std::vector<std::int64_t> steps_of(const std::vector<StepTable>& series) {
    std::vector<std::int64_t> out;
    for (const auto& s : series) out.push_back(s.step);
    return out;
}

}

TEST_CASE("argmax_earliest and criterion names") {
    CHECK(argmax_earliest({1, 3, 3, 2}) == 1);
    CHECK(argmax_earliest({0.1, 0.4, 0.9, 0.7, 0.2}) == 2);
    CHECK(argmax_earliest({5}) == 0);
    CHECK(stopping_criterion_from_string(to_string(StoppingCriterion::silhouette)) == StoppingCriterion::silhouette);
    CHECK(stopping_criterion_from_string(to_string(StoppingCriterion::avg_knn_1_4)) == StoppingCriterion::avg_knn_1_4);
    CHECK_THROWS_AS(stopping_criterion_from_string("accuracy"), UsageError);
}

TEST_CASE("select_checkpoint") {
    Rng rng(1);
    auto t = moa_table(rng, 4, 2, 3, 10, 1, 0.5);
    std::vector<StepTable> single{{0, t}};
    auto rule = select_checkpoint(steps_of(single), points_of(single), StoppingCriterion::silhouette);
    CHECK(rule.selected_step == 0);
    CHECK(rule.trace.size() == 1);

    // Blend from noise toward the clean table and back; the silhouette should peak at the clean one.
    std::vector<StepTable> series;
    const MatrixXd clean = t.matrix();
    const MatrixXd noise = testing::normal_matrix(rng, clean.rows(), clean.cols(), 3.0);
    const std::vector<double> weights{0.0, 0.4, 0.8, 1.0, 0.7, 0.2};
    for (std::size_t i = 0; i < weights.size(); ++i) {
        series.push_back({static_cast<std::int64_t>(50 * i), t.with_vectors(weights[i] * clean + (1 - weights[i]) * noise)});
    }
    rule = select_checkpoint(steps_of(series), points_of(series), StoppingCriterion::silhouette);
    for (std::size_t i = 1; i < 4; ++i) {
        CHECK(rule.trace[i] > rule.trace[i - 1]);
    }
    CHECK(rule.trace[4] < rule.trace[3]);
    CHECK(rule.selected_step == 150);

    CHECK_THROWS_AS(select_checkpoint({}, {}, StoppingCriterion::silhouette), DataError);
}

TEST_CASE("loco_cv never shows the held-out compound to the criterion") {
    Rng rng(2);
    auto t = moa_table(rng, 4, 2, 4, 8, 1, 1.0);
    std::vector<StepTable> series{{0, t}, {50, t.with_vectors(t.matrix() + testing::normal_matrix(rng, t.size(), 4))}};
    std::map<std::string, int> calls;
    auto result = loco_cv(series, StoppingCriterion::avg_knn_1_4, [&](const std::string& held_out, const std::vector<TreatmentPoint>& points) {
        ++calls[held_out];
        for (const auto& p : points) {
            CHECK(p.compound != held_out);
        }
        CHECK_FALSE(points.empty());
    });
    CHECK(calls.size() == 4);
    for (const auto& [compound, n] : calls) {
        CHECK(n == 2);
    }
    CHECK(result.folds.size() == 4);
    CHECK(result.pooled_points == 16);
}

TEST_CASE("loco_cv with a single checkpoint selects it in every fold") {
    Rng rng(3);
    auto t = moa_table(rng, 3, 2, 4, 8, 1, 0.5);
    auto result = loco_cv({{7, t}}, StoppingCriterion::avg_knn_1_4);
    for (const auto& fold : result.folds) {
        CHECK(fold.selected_step == 7);
    }
    const auto points = treatment_means(t);
    // With one checkpoint the pooled held-out scores cover every point once.
    for (int k = 1; k <= 4; ++k) {
        CHECK(result.knn_nsc[k - 1] == doctest::Approx(knn_moa(points, k, NeighborFilter::nsc)).epsilon(1e-12));
        CHECK(result.knn_nsc_nsb[k - 1] == doctest::Approx(knn_moa(points, k, NeighborFilter::nsc_nsb)).epsilon(1e-12));
    }
}

TEST_CASE("loco_cv pools held-out scores across folds") {
    Rng rng(4);
    auto t = moa_table(rng, 3, 2, 4, 6, 1, 2.0);
    std::vector<StepTable> series;
    for (int s = 0; s < 4; ++s) {
        series.push_back({10 * s, t.with_vectors(t.matrix() + testing::normal_matrix(rng, t.size(), 4, 1.5))});
    }
    const auto steps = steps_of(series);
    const auto points = points_of(series);
    const auto result = loco_cv_points(steps, points, StoppingCriterion::avg_knn_1_4);

    // Hand pooling: pick each fold's step from the remaining compounds, then sum the held-out scores.
    std::array<double, 4> nsc{}, nsb{};
    double count = 0;
    std::map<std::string, std::int64_t> picked;
    for (const std::string compound : {"C0", "C1", "C2"}) {
        std::size_t best = 0;
        double best_value = -1e300;
        for (std::size_t s = 0; s < points.size(); ++s) {
            std::vector<TreatmentPoint> rest;
            for (const auto& p : points[s]) {
                if (p.compound != compound) rest.push_back(p);
            }
            double value = 0;
            for (int k = 1; k <= 4; ++k) value += knn_moa(rest, k, NeighborFilter::nsc) / 4.0;
            if (value > best_value) {
                best_value = value;
                best = s;
            }
        }
        picked[compound] = steps[best];
        for (int k = 1; k <= 4; ++k) {
            const auto a = knn_moa_scores(points[best], k, NeighborFilter::nsc);
            const auto b = knn_moa_scores(points[best], k, NeighborFilter::nsc_nsb);
            for (std::size_t i = 0; i < a.size(); ++i) {
                if (points[best][i].compound == compound) {
                    nsc[k - 1] += a[i];
                    nsb[k - 1] += b[i];
                    count += k == 1;
                }
            }
        }
    }
    CHECK(result.pooled_points == static_cast<std::size_t>(count));
    for (int k = 0; k < 4; ++k) {
        CHECK(std::abs(result.knn_nsc[k] - 100.0 * nsc[k] / count) < 1e-12);
        CHECK(std::abs(result.knn_nsc_nsb[k] - 100.0 * nsb[k] / count) < 1e-12);
    }
    for (const auto& fold : result.folds) {
        CHECK(picked.at(fold.held_out) == fold.selected_step);
    }
    const auto j = to_json(result);
    CHECK(j.contains("knn_nsc"));
}

TEST_CASE("loco_cv errors") {
    Rng rng(5);
    auto one = moa_table(rng, 1, 1, 2, 5, 1, 1.0);
    CHECK_THROWS_AS(loco_cv({{0, one}}, StoppingCriterion::silhouette), DataError);
    CHECK_THROWS_AS(loco_cv({}, StoppingCriterion::silhouette), DataError);
}

TEST_CASE("bootstrap_rows preserves per-well counts") {
    Rng rng(6);
    auto t = moa_table(rng, 3, 2, 2, 13, 4, 1.0);
    std::map<std::pair<std::string, std::string>, int> counts;
    for (const auto& r : t.records) ++counts[{r.plate, r.well}];
    for (int rep = 0; rep < 20; ++rep) {
        const auto rows = bootstrap_rows(t, rng);
        CHECK(rows.size() == t.size());
        std::map<std::pair<std::string, std::string>, int> seen;
        for (auto r : rows) ++seen[{t.records[r].plate, t.records[r].well}];
        CHECK(seen == counts);
    }
}

TEST_CASE("bootstrap_metrics") {
    Rng rng(7);
    auto t = moa_table(rng, 3, 2, 2, 20, 3, 1.0);

    BootstrapOptions opts;
    opts.seed = 11;
    auto count = bootstrap_metrics(t, [](const EmbeddingTable& s) { return MetricValues{{"rows", static_cast<double>(s.size())}}; }, opts);
    CHECK(count.replicates.size() == 100);
    CHECK(count.std.at("rows") == 0.0);
    CHECK(count.mean.at("rows") == static_cast<double>(t.size()));

    auto constant = t;
    for (auto& r : constant.records) r.vector[2] = 4.25;
    auto flat = bootstrap_metrics(constant, [](const EmbeddingTable& s) { return MetricValues{{"mean", s.matrix().col(2).mean()}}; }, opts);
    CHECK(flat.std.at("mean") == 0.0);

    EmbeddingTable well;
    testing::add_rows(well, "A", "DMSO", testing::normal_matrix(rng, 100, 1, 2.0), std::nullopt, "", 1, "0");
    const Eigen::VectorXd x = well.matrix().col(0);
    const double s = std::sqrt((x.array() - x.mean()).square().sum() / 99.0);
    auto mean = bootstrap_metrics(well, [](const EmbeddingTable& b) { return MetricValues{{"mean", b.matrix().col(0).mean()}}; }, opts);
    CHECK(std::abs(mean.std.at("mean") / (s / 10.0) - 1.0) <= 0.25);

    BootstrapOptions threaded = opts;
    threaded.threads = 4;
    auto metric = [](const EmbeddingTable& b) { return MetricValues{{"sum", b.matrix().sum()}}; };
    const auto a = bootstrap_metrics(t, metric, opts);
    const auto c = bootstrap_metrics(t, metric, threaded);
    CHECK(a.replicates == c.replicates);
    CHECK(a.mean == c.mean);
    CHECK(a.std == c.std);
    CHECK(to_json(a) == to_json(c));

    BootstrapOptions none = opts;
    none.replicates = 0;
    CHECK_THROWS_AS(bootstrap_metrics(t, metric, none), DataError);
}

TEST_CASE("per-replicate stopping reduces to plain bootstrap") {
    Rng rng(8);
    auto t = moa_table(rng, 4, 2, 3, 10, 2, 1.0);
    MetricClosure metric = [](const EmbeddingTable& b) {
        return MetricValues{{"knn1", knn_moa(treatment_means(b), 1, NeighborFilter::nsc)}, {"sum", b.matrix().sum()}};
    };
    StoppingBootstrapOptions opts;
    opts.bootstrap.replicates = 30;
    opts.bootstrap.seed = 5;
    opts.metric = metric;

    const auto plain = bootstrap_metrics(t, metric, opts.bootstrap);
    const auto single = bootstrap_with_per_replicate_stopping({{0, t}}, StoppingCriterion::silhouette, opts);
    CHECK(single.replicates == plain.replicates);

    const auto same = bootstrap_with_per_replicate_stopping({{0, t}, {50, t}, {100, t}}, StoppingCriterion::avg_knn_1_4, opts);
    for (const auto& [name, value] : plain.mean) {
        CHECK(std::abs(same.mean.at(name) - value) < 1e-12);
        CHECK(std::abs(same.std.at(name) - plain.std.at(name)) < 1e-12);
    }
    for (const auto& steps : same.selected_steps) {
        CHECK(steps == std::vector<std::int64_t>{0});
    }

    opts.metric = nullptr;
    CHECK_THROWS_AS(bootstrap_with_per_replicate_stopping({{0, t}}, StoppingCriterion::silhouette, opts), DataError);
}

TEST_CASE("per-replicate stopping varies with the resample") {
    Rng rng(9);
    // Each checkpoint corrupts a different single row. A replicate that draws more
    // copies of one checkpoint's corrupted row favours the other checkpoint.
    auto t = moa_table(rng, 6, 3, 2, 3, 1, 0.3);
    std::size_t row_a = 0, row_b = 0;
    for (std::size_t r = 0; r < t.size(); ++r) {
        if (t.records[r].compound == "C0" && !row_a) row_a = r;
        if (t.records[r].compound == "C1" && !row_b) row_b = r;
    }
    auto first = t, second = t;
    first.records[row_a].vector = -10.0 * t.records[row_a].vector;
    second.records[row_b].vector = -10.0 * t.records[row_b].vector;
    StoppingBootstrapOptions opts;
    opts.bootstrap.replicates = 40;
    opts.bootstrap.seed = 3;
    opts.metric = [](const EmbeddingTable& b) { return MetricValues{{"silhouette", silhouette_moa(treatment_means(b))}}; };
    const auto result = bootstrap_with_per_replicate_stopping({{0, first}, {1, second}}, StoppingCriterion::silhouette, opts);
    std::set<std::int64_t> chosen;
    for (const auto& steps : result.selected_steps) {
        REQUIRE(steps.size() == 1);
        chosen.insert(steps.front());
    }
    CHECK(chosen == std::set<std::int64_t>{0, 1});
    CHECK(to_json(result).contains("selected_steps"));

    opts.loco = true;
    const auto loco = bootstrap_with_per_replicate_stopping({{0, first}, {1, second}}, StoppingCriterion::silhouette, opts);
    CHECK(loco.mean.count("knn_nsc_1"));
    CHECK(loco.selected_steps.front().size() == 6);
}
