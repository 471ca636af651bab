#include "wdn/cli.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "wdn/checkpoint.hpp"
#include "wdn/coral.hpp"
#include "wdn/errors.hpp"
#include "wdn/metrics.hpp"
#include "wdn/parallel.hpp"
#include "wdn/preprocess.hpp"
#include "wdn/synthgen.hpp"
#include "wdn/validation.hpp"
#include "wdn/wdn_train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace wdn::cli {

namespace {

template <typename T>
void read_field(const json& doc, const char* name, T& out) {
    if (!doc.contains(name)) {
        return;
    }
    try {
        out = doc.at(name).get<T>();
    } catch (const json::exception&) {
        throw DataError(std::string("TrainConfig.") + name + ": wrong type");
    }
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError(path.string() + ": malformed JSON: " + e.what());
    }
}

void write_json(const fs::path& path, const json& doc) {
    write_file_atomically(path, doc.dump(2) + "\n");
}

struct Options {
    std::vector<std::string> argv;
    std::string subcommand;
    std::vector<std::string> inputs;
    std::string output;
    std::string config;
    std::string schema;
    std::string method;
    std::string checkpoints;
    std::string criterion;
    std::string pca;
    std::string manifest;
    std::optional<std::uint64_t> seed;
    int bootstrap = 0;
    bool loco = false;
    bool no_domain = false;
    long k = 50;
    double eta = 1.0;
};

TableSchema schema_of(const Options& o) {
    TableSchema schema = o.schema.empty() ? TableSchema{} : load_schema(o.schema);
    return schema;
}

EmbeddingTable load_input(const Options& o, std::size_t i = 0) {
    if (o.inputs.size() <= i) {
        throw UsageError("--input is required");
    }
    return load_table(o.inputs[i], schema_of(o));
}

fs::path prepare_output(const Options& o) {
    if (o.output.empty()) {
        throw UsageError("--output is required");
    }
    fs::path out(o.output);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) {
        throw DataError("cannot create output directory " + out.string() + ": " + ec.message());
    }
    return out;
}

void write_manifest(const Options& o, const fs::path& out, const json& config, std::uint64_t seed, double seconds) {
    json manifest;
    manifest["subcommand"] = o.subcommand;
    manifest["argv"] = o.argv;
    manifest["config"] = config;
    manifest["inputs"] = o.inputs;
    manifest["output"] = o.output;
    manifest["seed"] = seed;
    manifest["version"] = tool_version;
    manifest["wall_clock_seconds"] = seconds;
    write_json(out / "run_manifest.json", manifest);
}

std::string checkpoint_name(std::int64_t step) {
    return "ckpt_" + std::to_string(step) + ".json";
}

int cmd_generate(const Options& o, json& snapshot, std::uint64_t& seed) {
    if (o.config.empty()) {
        throw UsageError("generate: --config is required");
    }
    SynthConfig cfg = synth_config_from_json(read_json_file(o.config));
    if (o.seed) {
        cfg.seed = *o.seed;
    }
    seed = cfg.seed;
    snapshot = to_json(cfg);
    const auto out = prepare_output(o);
    const auto result = generate(cfg);
    save_table(result.table, out / "table.csv", schema_of(o));
    write_json(out / "ground_truth.json", ground_truth_json(result));
    return exit_ok;
}

int cmd_preprocess(const Options& o, json& snapshot) {
    const auto table = load_input(o);
    const auto out = prepare_output(o);
    fs::create_directories(out / "checkpoints");
    snapshot = {{"method", o.method}};
    EmbeddingTable result;
    if (o.method == "tvn") {
        const auto t = tvn_fit(table);
        save_checkpoint(make_checkpoint(t), out / "checkpoints" / "tvn.json");
        result = tvn_apply(t, table);
    } else if (o.method == "percentile+pca") {
        if (o.k < 1) {
            throw UsageError("--k must be positive");
        }
        snapshot["k"] = o.k;
        const auto scaler = percentile_fit(table);
        save_checkpoint(make_checkpoint(scaler, table.dim), out / "checkpoints" / "percentile.json");
        const auto scaled = percentile_apply(scaler, table);
        const auto pca = reduce_dim_fit(scaled, o.k);
        save_checkpoint(make_checkpoint(pca), out / "checkpoints" / "pca.json");
        result = reduce_dim_apply(pca, scaled);
    } else {
        throw UsageError("unknown preprocessing method '" + o.method + "' (expected tvn or percentile+pca)");
    }
    save_table(result, out / "table.csv", schema_of(o));
    return exit_ok;
}

int cmd_align(const Options& o, json& snapshot, std::uint64_t& seed) {
    const auto table = load_input(o);
    if (o.method != "wdn" && o.method != "coral") {
        throw UsageError("unknown alignment method '" + o.method + "' (expected wdn or coral)");
    }
    const auto out = prepare_output(o);
    const auto ckpt_dir = out / "checkpoints";
    fs::create_directories(ckpt_dir);

    if (o.method == "coral") {
        double eta = o.eta;
        if (!o.config.empty()) {
            const auto doc = read_json_file(o.config);
            if (doc.contains("eta")) {
                if (!doc["eta"].is_number()) {
                    throw DataError("CoralConfig.eta: wrong type");
                }
                eta = doc["eta"].get<double>();
            }
        }
        snapshot = {{"method", "coral"}, {"eta", eta}};
        const auto t = coral_fit(table, eta);
        save_checkpoint(make_checkpoint(t, table.dim), ckpt_dir / checkpoint_name(0));
        save_table(coral_apply(t, table), out / "table.csv", schema_of(o));
        return exit_ok;
    }

    TrainConfig cfg;
    if (!o.config.empty()) {
        cfg = train_config_from_json(read_json_file(o.config));
    }
    if (o.seed) {
        cfg.seed = *o.seed;
    }
    cfg.validate();
    seed = cfg.seed;
    snapshot = to_json(cfg);
    snapshot["method"] = "wdn";

    std::ostringstream curve;
    curve << "step,phase,cycle,loss\n";
    auto observer = [&curve](const TrainEvent& e) {
        static const char* names[] = {"pretrain", "transform", "critic"};
        curve << e.step << ',' << names[static_cast<int>(e.phase)] << ',' << e.cycle << ','
              << format_double(e.loss->total) << '\n';
    };
    Rng rng(cfg.seed);
    auto model = make_model(table, cfg.loss_mode, cfg.hidden, rng);
    auto result = train(std::move(model), table, cfg, rng, {observer});
    for (const auto& c : result.checkpoints) {
        save_checkpoint(c, ckpt_dir / checkpoint_name(c.step));
    }
    write_file_atomically(out / "loss_curve.csv", curve.str());
    if (!result.checkpoints.empty()) {
        save_table(apply_checkpoint(result.checkpoints.back(), table), out / "table.csv", schema_of(o));
    }
    if (result.diverged) {
        std::cerr << "wdn: training diverged: " << result.message << '\n';
        return exit_numerical;
    }
    return exit_ok;
}

std::vector<Checkpoint> load_checkpoint_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) {
        throw DataError("checkpoint directory " + dir.string() + " does not exist");
    }
    std::vector<Checkpoint> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() == ".json") {
            out.push_back(load_checkpoint(entry.path()));
        }
    }
    if (out.empty()) {
        throw DataError("no checkpoints in " + dir.string());
    }
    std::stable_sort(out.begin(), out.end(), [](const Checkpoint& a, const Checkpoint& b) { return a.step < b.step; });
    return out;
}

ReportOptions report_options(const Options& o, std::uint64_t seed) {
    ReportOptions options;
    options.seed = seed;
    options.classification.forest.threads = default_threads();
    if (o.no_domain) {
        options.domain_logreg = options.domain_rf = options.chance = false;
    }
    return options;
}

int cmd_evaluate(const Options& o, json& snapshot, std::uint64_t& seed) {
    seed = o.seed.value_or(0);
    const auto out = prepare_output(o);
    if (o.bootstrap < 0) {
        throw UsageError("--bootstrap must be >= 0");
    }
    const auto criterion = stopping_criterion_from_string(o.criterion.empty() ? "knn" : o.criterion);
    snapshot = {
        {"bootstrap", o.bootstrap},
        {"criterion", to_string(criterion)},
        {"loco", o.loco},
        {"domain_metrics", !o.no_domain},
        {"checkpoints", o.checkpoints},
    };

    std::vector<StepTable> series;
    if (!o.checkpoints.empty()) {
        series = apply_checkpoints(load_checkpoint_dir(o.checkpoints), load_input(o));
    } else {
        if (o.inputs.empty()) {
            throw UsageError("--input is required");
        }
        for (std::size_t i = 0; i < o.inputs.size(); ++i) {
            series.push_back({static_cast<std::int64_t>(i), load_input(o, i)});
        }
    }

    const auto options = report_options(o, seed);
    const BootstrapOptions boot{o.bootstrap, seed, default_threads()};
    // Replicates are already spread over threads, so each replicate runs its forest serially.
    auto replicate_options = options;
    replicate_options.classification.forest.threads = 1;
    const MetricClosure metric = [replicate_options](const EmbeddingTable& t) {
        return evaluate_report(t, replicate_options).to_map();
    };

    json report;
    json steps = json::array();
    std::ostringstream curves;
    curves << "step,metric,value,bootstrap_std\n";
    for (const auto& s : series) {
        auto r = evaluate_report(s.table, options);
        if (o.bootstrap > 0) {
            auto b = bootstrap_metrics(s.table, metric, boot);
            for (const auto& [name, mean] : b.mean) {
                r.bootstrap[name] = {mean, b.std.at(name)};
            }
        }
        for (const auto& [name, value] : r.to_map()) {
            curves << s.step << ',' << name << ',' << format_double(value) << ',';
            auto it = r.bootstrap.find(name);
            if (it != r.bootstrap.end()) {
                curves << format_double(it->second.second);
            }
            curves << '\n';
        }
        json entry = to_json(r);
        entry["step"] = s.step;
        steps.push_back(std::move(entry));
    }
    report["steps"] = std::move(steps);

    std::vector<std::int64_t> step_ids;
    std::vector<std::vector<TreatmentPoint>> points;
    for (const auto& s : series) {
        step_ids.push_back(s.step);
        points.push_back(treatment_means(s.table));
    }
    const auto rule = select_checkpoint(step_ids, points, criterion);
    report["selection"] = {
        {"criterion", to_string(criterion)},
        {"selected_step", rule.selected_step},
        {"trace", rule.trace},
    };
    if (o.loco) {
        report["loco"] = to_json(loco_cv_points(step_ids, points, criterion));
    }
    if (o.bootstrap > 0 && series.size() > 1) {
        StoppingBootstrapOptions sb;
        sb.bootstrap = boot;
        sb.loco = o.loco;
        sb.metric = metric;
        report["selection_bootstrap"] = to_json(bootstrap_with_per_replicate_stopping(series, criterion, sb));
    }

    write_json(out / "report.json", report);
    write_file_atomically(out / "curves.csv", curves.str());

    if (!o.pca.empty()) {
        const auto& chosen = points[rule.selected_index];
        const auto coords = pca_coordinates(chosen);
        std::ostringstream csv;
        csv << "treatment,domain,moa,pc1,pc2\n";
        for (std::size_t i = 0; i < chosen.size(); ++i) {
            csv << chosen[i].treatment << ',' << chosen[i].domain << ',' << chosen[i].moa << ','
                << format_double(coords(i, 0)) << ',' << format_double(coords(i, 1)) << '\n';
        }
        write_file_atomically(o.pca, csv.str());
    }
    return exit_ok;
}

int dispatch(const Options& o);

int cmd_rerun(const Options& o) {
    if (o.manifest.empty()) {
        throw UsageError("rerun: --manifest is required");
    }
    const auto doc = read_json_file(o.manifest);
    if (!doc.contains("argv") || !doc["argv"].is_array()) {
        throw DataError("manifest " + o.manifest + " has no argv");
    }
    return run(doc["argv"].get<std::vector<std::string>>());
}

int dispatch(const Options& o) {
    if (o.subcommand == "rerun") {
        return cmd_rerun(o);
    }
    const auto start = std::chrono::steady_clock::now();
    json snapshot = json::object();
    std::uint64_t seed = o.seed.value_or(0);
    int code = exit_ok;
    if (o.subcommand == "generate") {
        code = cmd_generate(o, snapshot, seed);
    } else if (o.subcommand == "preprocess") {
        code = cmd_preprocess(o, snapshot);
    } else if (o.subcommand == "align") {
        code = cmd_align(o, snapshot, seed);
    } else if (o.subcommand == "evaluate") {
        code = cmd_evaluate(o, snapshot, seed);
    } else {
        throw UsageError("unknown subcommand '" + o.subcommand + "'");
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_manifest(o, fs::path(o.output), snapshot, seed, seconds);
    return code;
}

}

TrainConfig train_config_from_json(const json& doc) {
    if (!doc.is_object()) {
        throw DataError("TrainConfig: expected a JSON object");
    }
    static const char* known[] = {
        "minibatch", "gamma", "pretrain_steps", "transform_steps_per_cycle", "critic_steps_per_cycle",
        "lr_transform", "lr_critic", "rmsprop_decay", "rmsprop_eps", "total_cycles", "checkpoint_every",
        "seed", "hidden", "loss_mode", "transform_reg"};
    for (const auto& item : doc.items()) {
        if (std::none_of(std::begin(known), std::end(known), [&](const char* k) { return item.key() == k; })) {
            throw DataError("TrainConfig." + item.key() + ": unknown field");
        }
    }
    TrainConfig cfg;
    read_field(doc, "minibatch", cfg.minibatch);
    read_field(doc, "gamma", cfg.gamma);
    read_field(doc, "pretrain_steps", cfg.pretrain_steps);
    read_field(doc, "transform_steps_per_cycle", cfg.transform_steps_per_cycle);
    read_field(doc, "critic_steps_per_cycle", cfg.critic_steps_per_cycle);
    read_field(doc, "lr_transform", cfg.lr_transform);
    read_field(doc, "lr_critic", cfg.lr_critic);
    read_field(doc, "rmsprop_decay", cfg.rmsprop_decay);
    read_field(doc, "rmsprop_eps", cfg.rmsprop_eps);
    read_field(doc, "total_cycles", cfg.total_cycles);
    read_field(doc, "checkpoint_every", cfg.checkpoint_every);
    read_field(doc, "seed", cfg.seed);
    read_field(doc, "hidden", cfg.hidden);
    read_field(doc, "transform_reg", cfg.transform_reg);
    if (doc.contains("loss_mode")) {
        std::string mode;
        read_field(doc, "loss_mode", mode);
        try {
            cfg.loss_mode = loss_mode_from_string(mode);
        } catch (const std::exception&) {
            throw DataError("TrainConfig.loss_mode: unknown mode '" + mode + "'");
        }
    }
    cfg.validate();
    return cfg;
}

json to_json(const TrainConfig& cfg) {
    return {
        {"minibatch", cfg.minibatch},
        {"gamma", cfg.gamma},
        {"pretrain_steps", cfg.pretrain_steps},
        {"transform_steps_per_cycle", cfg.transform_steps_per_cycle},
        {"critic_steps_per_cycle", cfg.critic_steps_per_cycle},
        {"lr_transform", cfg.lr_transform},
        {"lr_critic", cfg.lr_critic},
        {"rmsprop_decay", cfg.rmsprop_decay},
        {"rmsprop_eps", cfg.rmsprop_eps},
        {"total_cycles", cfg.total_cycles},
        {"checkpoint_every", cfg.checkpoint_every},
        {"seed", cfg.seed},
        {"hidden", cfg.hidden},
        {"loss_mode", to_string(cfg.loss_mode)},
        {"transform_reg", cfg.transform_reg},
        {"fingerprint", config_fingerprint(cfg)},
    };
}

int run(const std::vector<std::string>& args) {
    Options o;
    o.argv = args;
    CLI::App app{"Wasserstein distance network alignment of embedding domains"};
    app.require_subcommand(1);
    app.set_version_flag("--version", tool_version);

    auto add_common = [&o](CLI::App* sub) {
        sub->add_option("--output", o.output, "Output directory");
        sub->add_option("--schema", o.schema, "Column role mapping file (key=value lines)");
        sub->add_option("--seed", o.seed, "Random seed (overrides the config)");
    };

    auto* gen = app.add_subcommand("generate", "Write a synthetic table with known nuisance");
    gen->add_option("--config", o.config, "SynthConfig JSON")->required();
    add_common(gen);

    auto* pre = app.add_subcommand("preprocess", "Normalize a table");
    pre->add_option("--input", o.inputs, "Input CSV")->required()->expected(1);
    pre->add_option("--method", o.method, "tvn or percentile+pca")->required();
    pre->add_option("--k", o.k, "Output dimension for percentile+pca");
    add_common(pre);

    auto* align = app.add_subcommand("align", "Fit domain transforms");
    align->add_option("--input", o.inputs, "Input CSV")->required()->expected(1);
    align->add_option("--method", o.method, "wdn or coral")->required();
    align->add_option("--config", o.config, "TrainConfig JSON (wdn) or {\"eta\": x} (coral)");
    align->add_option("--eta", o.eta, "CORAL regularizer");
    add_common(align);

    auto* eval = app.add_subcommand("evaluate", "Compute metrics for tables or a checkpoint series");
    eval->add_option("--input", o.inputs, "Input CSV(s); with --checkpoints, the untransformed table")->required();
    eval->add_option("--checkpoints", o.checkpoints, "Directory of checkpoints to apply to --input");
    eval->add_option("--bootstrap", o.bootstrap, "Bootstrap replicates (0 disables)");
    eval->add_option("--criterion", o.criterion, "Stopping criterion: knn or silhouette");
    eval->add_flag("--loco", o.loco, "Leave-one-compound-out stopping selection");
    eval->add_flag("--no-domain", o.no_domain, "Skip domain classification metrics");
    eval->add_option("--pca", o.pca, "Write 2-D PCA coordinates of treatment points to this CSV");
    add_common(eval);

    auto* rerun = app.add_subcommand("rerun", "Repeat the run recorded in a manifest");
    rerun->add_option("--manifest", o.manifest, "run_manifest.json")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_usage;
    }
    o.subcommand = app.get_subcommands().front()->get_name();

    try {
        return dispatch(o);
    } catch (const UsageError& e) {
        std::cerr << "wdn: usage error: " << e.what() << '\n';
        return exit_usage;
    } catch (const DataError& e) {
        std::cerr << "wdn: data error: " << e.what() << '\n';
        return exit_data;
    } catch (const NumericalError& e) {
        std::cerr << "wdn: numerical failure: " << e.what() << '\n';
        return exit_numerical;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "wdn: " << e.what() << '\n';
        return exit_data;
    } catch (const std::exception& e) {
        std::cerr << "wdn: " << e.what() << '\n';
        return exit_failure;
    }
}

}
