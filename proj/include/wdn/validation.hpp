#ifndef WDN_VALIDATION_HPP
#define WDN_VALIDATION_HPP

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "wdn/checkpoint.hpp"
#include "wdn/data_model.hpp"
#include "wdn/metrics.hpp"

/**
 * @file validation.hpp
 * @brief Early-stopping selection by leave-one-compound-out cross validation and within-well bootstrap.
 */

namespace wdn {

enum class StoppingCriterion {
    /// Mean of the NSC k-NN MOA metric over k = 1..4.
    avg_knn_1_4,
    silhouette
};

std::string to_string(StoppingCriterion criterion);
StoppingCriterion stopping_criterion_from_string(const std::string& name);

/// A table as transformed by the checkpoint emitted at `step`.
struct StepTable {
    std::int64_t step = 0;
    EmbeddingTable table;
};

std::vector<StepTable> apply_checkpoints(const std::vector<Checkpoint>& checkpoints, const EmbeddingTable& table);

/// Criterion value on a set of treatment points.
double criterion_value(const std::vector<TreatmentPoint>& points, StoppingCriterion criterion);

struct StoppingRule {
    StoppingCriterion criterion = StoppingCriterion::avg_knn_1_4;
    /// Compound excluded from the criterion, empty when nothing was held out.
    std::string held_out;
    std::vector<std::int64_t> steps;
    std::vector<double> trace;
    std::size_t selected_index = 0;
    std::int64_t selected_step = 0;
};

/// Argmax over a criterion trace; ties go to the earliest entry.
std::size_t argmax_earliest(const std::vector<double>& trace);

/**
 * Pick the checkpoint maximizing the criterion over precomputed per-step points.
 * Points whose compound equals `held_out` are dropped first.
 */
StoppingRule select_checkpoint(
    const std::vector<std::int64_t>& steps,
    const std::vector<std::vector<TreatmentPoint>>& points_per_step,
    StoppingCriterion criterion,
    const std::string& held_out = "");

/// Called with the held-out compound and the exact points each criterion evaluation saw.
using CriterionHook = std::function<void(const std::string& held_out, const std::vector<TreatmentPoint>& points)>;

struct LocoResult {
    std::vector<StoppingRule> folds;
    /// k-NN metrics (percent) over the pooled held-out points of all folds.
    std::array<double, 4> knn_nsc{};
    std::array<double, 4> knn_nsc_nsb{};
    std::size_t pooled_points = 0;
};

nlohmann::json to_json(const LocoResult& result);

/**
 * Leave-one-compound-out early stopping. For each non-control compound, select the checkpoint
 * maximizing the criterion on all other compounds, then score only the held-out compound's
 * points at that checkpoint. Held-out scores are pooled across folds before averaging.
 */
LocoResult loco_cv(const std::vector<StepTable>& series, StoppingCriterion criterion, const CriterionHook& hook = {});

/// Same as `loco_cv()` over precomputed per-step points.
LocoResult loco_cv_points(
    const std::vector<std::int64_t>& steps,
    const std::vector<std::vector<TreatmentPoint>>& points_per_step,
    StoppingCriterion criterion,
    const CriterionHook& hook = {});

using MetricValues = std::map<std::string, double>;
using MetricClosure = std::function<MetricValues(const EmbeddingTable&)>;

struct BootstrapResult {
    std::vector<MetricValues> replicates;
    MetricValues mean;
    /// Sample standard deviation across replicates (zero for a single replicate).
    MetricValues std;
    /// Per replicate, the selected step of every stopping decision it made (empty for plain bootstrap).
    std::vector<std::vector<std::int64_t>> selected_steps;
};

nlohmann::json to_json(const BootstrapResult& result);

/**
 * Row indices of one bootstrap replicate: within every (plate, well), draw as many rows as it has,
 * uniformly with replacement. Wells are visited in sorted order.
 */
std::vector<std::size_t> bootstrap_rows(const EmbeddingTable& table, Rng& rng);

struct BootstrapOptions {
    int replicates = 100;
    std::uint64_t seed = 0;
    int threads = 1;
};

/**
 * Evaluate `metric` on `options.replicates` within-well resamples of `table`.
 * Replicate `r` uses `child_seed(seed, r)`, so results do not depend on the thread count.
 */
BootstrapResult bootstrap_metrics(const EmbeddingTable& table, const MetricClosure& metric, const BootstrapOptions& options = {});

struct StoppingBootstrapOptions {
    BootstrapOptions bootstrap;
    /// Select per held-out compound (reporting pooled k-NN metrics) instead of once globally.
    bool loco = false;
    /// Metric evaluated at the globally selected checkpoint when `loco` is false.
    MetricClosure metric;
};

/**
 * Bootstrap in which every replicate resamples the rows (identically across checkpoints),
 * re-runs the stopping-step selection on the resampled data and then evaluates metrics.
 */
BootstrapResult bootstrap_with_per_replicate_stopping(
    const std::vector<StepTable>& series,
    StoppingCriterion criterion,
    const StoppingBootstrapOptions& options);

/// Mean and sample standard deviation of each metric across replicates.
void summarize(BootstrapResult& result);

}

#endif
