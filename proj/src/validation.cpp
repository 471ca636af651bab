#include "wdn/validation.hpp"

#include <cmath>
#include <numeric>
#include <set>

#include "wdn/errors.hpp"
#include "wdn/parallel.hpp"
#include "wdn/random.hpp"

namespace wdn {

std::string to_string(StoppingCriterion criterion) {
    return criterion == StoppingCriterion::silhouette ? "silhouette" : "knn";
}

StoppingCriterion stopping_criterion_from_string(const std::string& name) {
    if (name == "knn" || name == "avg_knn_1_4") {
        return StoppingCriterion::avg_knn_1_4;
    }
    if (name == "silhouette") {
        return StoppingCriterion::silhouette;
    }
    throw UsageError("unknown stopping criterion '" + name + "' (expected knn or silhouette)");
}

std::vector<StepTable> apply_checkpoints(const std::vector<Checkpoint>& checkpoints, const EmbeddingTable& table) {
    std::vector<StepTable> out;
    out.reserve(checkpoints.size());
    for (const auto& c : checkpoints) {
        out.push_back({c.step, apply_checkpoint(c, table)});
    }
    return out;
}

double criterion_value(const std::vector<TreatmentPoint>& points, StoppingCriterion criterion) {
    if (criterion == StoppingCriterion::silhouette) {
        return silhouette_moa(points);
    }
    double total = 0;
    for (int k = 1; k <= 4; ++k) {
        total += knn_moa(points, k, NeighborFilter::nsc);
    }
    return total / 4;
}

std::size_t argmax_earliest(const std::vector<double>& trace) {
    if (trace.empty()) {
        throw DataError("cannot select from an empty trace");
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < trace.size(); ++i) {
        if (trace[i] > trace[best]) {
            best = i;
        }
    }
    return best;
}

namespace {

std::vector<TreatmentPoint> without_compound(const std::vector<TreatmentPoint>& points, const std::string& compound) {
    if (compound.empty()) {
        return points;
    }
    std::vector<TreatmentPoint> out;
    for (const auto& p : points) {
        if (p.compound != compound) {
            out.push_back(p);
        }
    }
    return out;
}

}

StoppingRule select_checkpoint(
    const std::vector<std::int64_t>& steps,
    const std::vector<std::vector<TreatmentPoint>>& points_per_step,
    StoppingCriterion criterion,
    const std::string& held_out)
{
    if (steps.empty()) {
        throw DataError("checkpoint list is empty");
    }
    if (steps.size() != points_per_step.size()) {
        throw DataError("select_checkpoint: steps and point sets differ in length");
    }
    StoppingRule rule;
    rule.criterion = criterion;
    rule.held_out = held_out;
    rule.steps = steps;
    rule.trace.reserve(steps.size());
    for (const auto& points : points_per_step) {
        rule.trace.push_back(criterion_value(without_compound(points, held_out), criterion));
    }
    rule.selected_index = argmax_earliest(rule.trace);
    rule.selected_step = steps[rule.selected_index];
    return rule;
}

LocoResult loco_cv_points(
    const std::vector<std::int64_t>& steps,
    const std::vector<std::vector<TreatmentPoint>>& points_per_step,
    StoppingCriterion criterion,
    const CriterionHook& hook)
{
    if (steps.empty()) {
        throw DataError("loco_cv: checkpoint list is empty");
    }
    std::set<std::string> compounds;
    for (const auto& p : points_per_step.front()) {
        compounds.insert(p.compound);
    }
    if (compounds.size() < 2) {
        throw DataError("loco_cv: need at least 2 non-control compounds, found " + std::to_string(compounds.size()));
    }

    LocoResult result;
    std::array<double, 4> nsc_sum{}, nsb_sum{};
    for (const auto& compound : compounds) {
        StoppingRule rule;
        rule.criterion = criterion;
        rule.held_out = compound;
        rule.steps = steps;
        for (const auto& points : points_per_step) {
            auto remaining = without_compound(points, compound);
            if (hook) {
                hook(compound, remaining);
            }
            rule.trace.push_back(criterion_value(remaining, criterion));
        }
        rule.selected_index = argmax_earliest(rule.trace);
        rule.selected_step = steps[rule.selected_index];

        const auto& chosen = points_per_step[rule.selected_index];
        for (int k = 1; k <= 4; ++k) {
            auto nsc = knn_moa_scores(chosen, k, NeighborFilter::nsc);
            auto nsb = knn_moa_scores(chosen, k, NeighborFilter::nsc_nsb);
            for (std::size_t i = 0; i < chosen.size(); ++i) {
                if (chosen[i].compound == compound) {
                    nsc_sum[k - 1] += nsc[i];
                    nsb_sum[k - 1] += nsb[i];
                }
            }
        }
        for (const auto& p : chosen) {
            result.pooled_points += p.compound == compound;
        }
        result.folds.push_back(std::move(rule));
    }

    for (int k = 0; k < 4; ++k) {
        result.knn_nsc[k] = 100.0 * nsc_sum[k] / static_cast<double>(result.pooled_points);
        result.knn_nsc_nsb[k] = 100.0 * nsb_sum[k] / static_cast<double>(result.pooled_points);
    }
    return result;
}

LocoResult loco_cv(const std::vector<StepTable>& series, StoppingCriterion criterion, const CriterionHook& hook) {
    std::vector<std::int64_t> steps;
    std::vector<std::vector<TreatmentPoint>> points;
    for (const auto& s : series) {
        steps.push_back(s.step);
        points.push_back(treatment_means(s.table));
    }
    return loco_cv_points(steps, points, criterion, hook);
}

nlohmann::json to_json(const LocoResult& result) {
    nlohmann::json doc;
    doc["knn_nsc"] = result.knn_nsc;
    doc["knn_nsc_nsb"] = result.knn_nsc_nsb;
    doc["pooled_points"] = result.pooled_points;
    nlohmann::json folds = nlohmann::json::array();
    for (const auto& f : result.folds) {
        folds.push_back({
            {"held_out", f.held_out},
            {"criterion", to_string(f.criterion)},
            {"selected_step", f.selected_step},
            {"steps", f.steps},
            {"trace", f.trace},
        });
    }
    doc["folds"] = std::move(folds);
    return doc;
}

std::vector<std::size_t> bootstrap_rows(const EmbeddingTable& table, Rng& rng) {
    std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> wells;
    for (std::size_t r = 0; r < table.size(); ++r) {
        wells[{table.records[r].plate, table.records[r].well}].push_back(r);
    }
    std::vector<std::size_t> out;
    out.reserve(table.size());
    for (const auto& entry : wells) {
        const auto& rows = entry.second;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            out.push_back(rows[uniform_index(rng, rows.size())]);
        }
    }
    return out;
}

void summarize(BootstrapResult& result) {
    result.mean.clear();
    result.std.clear();
    if (result.replicates.empty()) {
        return;
    }
    const double n = static_cast<double>(result.replicates.size());
    for (const auto& entry : result.replicates.front()) {
        const auto& name = entry.first;
        double sum = 0;
        for (const auto& rep : result.replicates) {
            sum += rep.at(name);
        }
        const double mean = sum / n;
        double ss = 0;
        for (const auto& rep : result.replicates) {
            const double d = rep.at(name) - mean;
            ss += d * d;
        }
        result.mean[name] = mean;
        result.std[name] = result.replicates.size() > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
    }
}

nlohmann::json to_json(const BootstrapResult& result) {
    nlohmann::json doc;
    doc["mean"] = result.mean;
    doc["std"] = result.std;
    doc["replicates"] = result.replicates;
    if (!result.selected_steps.empty()) {
        doc["selected_steps"] = result.selected_steps;
    }
    return doc;
}

BootstrapResult bootstrap_metrics(const EmbeddingTable& table, const MetricClosure& metric, const BootstrapOptions& options) {
    if (options.replicates < 1) {
        throw DataError("bootstrap: need at least one replicate");
    }
    BootstrapResult result;
    result.replicates.resize(options.replicates);
    parallel_for(static_cast<std::size_t>(options.replicates), options.threads, [&](std::size_t r) {
        Rng rng(child_seed(options.seed, r));
        result.replicates[r] = metric(table.subset(bootstrap_rows(table, rng)));
    });
    summarize(result);
    return result;
}

BootstrapResult bootstrap_with_per_replicate_stopping(
    const std::vector<StepTable>& series,
    StoppingCriterion criterion,
    const StoppingBootstrapOptions& options)
{
    if (series.empty()) {
        throw DataError("bootstrap: checkpoint list is empty");
    }
    if (options.bootstrap.replicates < 1) {
        throw DataError("bootstrap: need at least one replicate");
    }
    if (!options.loco && !options.metric) {
        throw DataError("bootstrap: a metric is required when not using leave-one-compound-out selection");
    }
    for (const auto& s : series) {
        if (s.table.size() != series.front().table.size()) {
            throw DataError("bootstrap: checkpoint tables differ in row count");
        }
    }

    const int reps = options.bootstrap.replicates;
    BootstrapResult result;
    result.replicates.resize(reps);
    result.selected_steps.resize(reps);
    std::vector<std::int64_t> steps;
    for (const auto& s : series) {
        steps.push_back(s.step);
    }

    parallel_for(static_cast<std::size_t>(reps), options.bootstrap.threads, [&](std::size_t r) {
        Rng rng(child_seed(options.bootstrap.seed, r));
        // Row structure is shared by all checkpoints, so one draw serves every step.
        const auto rows = bootstrap_rows(series.front().table, rng);
        std::vector<EmbeddingTable> resampled;
        std::vector<std::vector<TreatmentPoint>> points;
        resampled.reserve(series.size());
        for (const auto& s : series) {
            resampled.push_back(s.table.subset(rows));
            points.push_back(treatment_means(resampled.back()));
        }

        if (options.loco) {
            auto loco = loco_cv_points(steps, points, criterion);
            MetricValues values;
            for (int k = 0; k < 4; ++k) {
                values["knn_nsc_" + std::to_string(k + 1)] = loco.knn_nsc[k];
                values["knn_nsc_nsb_" + std::to_string(k + 1)] = loco.knn_nsc_nsb[k];
            }
            result.replicates[r] = std::move(values);
            for (const auto& f : loco.folds) {
                result.selected_steps[r].push_back(f.selected_step);
            }
        } else {
            auto rule = select_checkpoint(steps, points, criterion);
            result.replicates[r] = options.metric(resampled[rule.selected_index]);
            result.selected_steps[r].push_back(rule.selected_step);
        }
    });
    summarize(result);
    return result;
}

}
