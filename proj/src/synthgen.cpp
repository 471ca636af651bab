#include "wdn/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "wdn/errors.hpp"
#include "wdn/random.hpp"

namespace wdn {

namespace {

const std::string control_compound = "DMSO";

Eigen::VectorXd normal_vector(Rng& rng, int dim, double scale) {
    Eigen::VectorXd v(dim);
    for (int i = 0; i < dim; ++i) {
        v[i] = scale * standard_normal(rng);
    }
    return v;
}

template <typename T>
void read_field(const nlohmann::json& doc, const char* name, T& out) {
    if (!doc.contains(name)) {
        return;
    }
    try {
        out = doc.at(name).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw DataError(std::string("SynthConfig.") + name + ": wrong type");
    }
}

}

void SynthConfig::validate() const {
    auto fail = [](const std::string& field, const std::string& why) {
        throw DataError("SynthConfig." + field + ": " + why);
    };
    if (dim < 1) fail("dim", "must be >= 1");
    if (n_domains < 1) fail("n_domains", "must be >= 1");
    if (n_treatments < 1) fail("n_treatments", "must be >= 1 (the control counts)");
    if (compounds_per_moa < 1) fail("compounds_per_moa", "must be >= 1");
    if (domains_per_treatment < 0 || domains_per_treatment > n_domains) {
        fail("domains_per_treatment", "must be in [0, n_domains]");
    }
    if (cells_per_group < 1) fail("cells_per_group", "must be >= 1");
    if (wells_per_group < 1 || wells_per_group > cells_per_group) {
        fail("wells_per_group", "must be in [1, cells_per_group]");
    }
    if (!(treatment_effect_scale >= 0)) fail("treatment_effect_scale", "must be >= 0");
    if (!(compound_spread >= 0)) fail("compound_spread", "must be >= 0");
    if (!(nuisance_scale >= 0)) fail("nuisance_scale", "must be >= 0");
    if (!(noise_scale >= 0)) fail("noise_scale", "must be >= 0");
    for (const auto& [name, moa] : moa_assignment) {
        bool known = false;
        for (int t = 1; t < n_treatments; ++t) {
            known = known || synth_treatment_name(t) == name;
        }
        if (!known) fail("moa_assignment", "unknown treatment '" + name + "'");
        if (moa.empty()) fail("moa_assignment", "empty MOA for '" + name + "'");
    }
}

SynthConfig synth_config_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) {
        throw DataError("SynthConfig: expected a JSON object");
    }
    static const char* known[] = {
        "dim", "n_domains", "n_treatments", "compounds_per_moa", "moa_assignment", "domains_per_treatment",
        "cells_per_group", "wells_per_group", "treatment_effect_scale", "compound_spread", "nuisance_scale",
        "noise_scale", "seed"};
    for (const auto& item : doc.items()) {
        bool ok = false;
        for (const char* k : known) {
            ok = ok || item.key() == k;
        }
        if (!ok) {
            throw DataError("SynthConfig." + item.key() + ": unknown field");
        }
    }
    SynthConfig cfg;
    read_field(doc, "dim", cfg.dim);
    read_field(doc, "n_domains", cfg.n_domains);
    read_field(doc, "n_treatments", cfg.n_treatments);
    read_field(doc, "compounds_per_moa", cfg.compounds_per_moa);
    read_field(doc, "moa_assignment", cfg.moa_assignment);
    read_field(doc, "domains_per_treatment", cfg.domains_per_treatment);
    read_field(doc, "cells_per_group", cfg.cells_per_group);
    read_field(doc, "wells_per_group", cfg.wells_per_group);
    read_field(doc, "treatment_effect_scale", cfg.treatment_effect_scale);
    read_field(doc, "compound_spread", cfg.compound_spread);
    read_field(doc, "nuisance_scale", cfg.nuisance_scale);
    read_field(doc, "noise_scale", cfg.noise_scale);
    read_field(doc, "seed", cfg.seed);
    cfg.validate();
    return cfg;
}

nlohmann::json to_json(const SynthConfig& cfg) {
    return {
        {"dim", cfg.dim},
        {"n_domains", cfg.n_domains},
        {"n_treatments", cfg.n_treatments},
        {"compounds_per_moa", cfg.compounds_per_moa},
        {"moa_assignment", cfg.moa_assignment},
        {"domains_per_treatment", cfg.domains_per_treatment},
        {"cells_per_group", cfg.cells_per_group},
        {"wells_per_group", cfg.wells_per_group},
        {"treatment_effect_scale", cfg.treatment_effect_scale},
        {"compound_spread", cfg.compound_spread},
        {"nuisance_scale", cfg.nuisance_scale},
        {"noise_scale", cfg.noise_scale},
        {"seed", cfg.seed},
    };
}

std::string synth_domain_name(int d) {
    return "D" + std::to_string(d);
}

std::string synth_treatment_name(int t) {
    return t == 0 ? control_compound : "C" + std::to_string(t);
}

SynthResult generate(const SynthConfig& cfg) {
    cfg.validate();
    const int dim = cfg.dim;
    Rng nuisance_rng(child_seed(cfg.seed, 1));
    Rng effect_rng(child_seed(cfg.seed, 2));
    Rng noise_rng(child_seed(cfg.seed, 3));

    SynthResult result;
    for (int d = 0; d < cfg.n_domains; ++d) {
        AffineTransform map;
        Eigen::MatrixXd A(dim, dim);
        for (int i = 0; i < dim; ++i) {
            for (int j = 0; j < dim; ++j) {
                A(i, j) = standard_normal(nuisance_rng) / std::sqrt(static_cast<double>(dim));
            }
        }
        map.M = Eigen::MatrixXd::Identity(dim, dim) + cfg.nuisance_scale * A;
        map.b = normal_vector(nuisance_rng, dim, cfg.nuisance_scale);
        if (map.M.fullPivLu().rank() < dim) {
            throw NumericalError("synthetic nuisance matrix for " + synth_domain_name(d) + " is singular");
        }
        result.nuisance[synth_domain_name(d)] = std::move(map);
    }

    std::map<std::string, std::string> moa_of;
    std::map<std::string, Eigen::VectorXd> moa_centre;
    for (int t = 1; t < cfg.n_treatments; ++t) {
        const auto name = synth_treatment_name(t);
        auto it = cfg.moa_assignment.find(name);
        moa_of[name] = it != cfg.moa_assignment.end() ? it->second : "M" + std::to_string((t - 1) / cfg.compounds_per_moa);
    }
    // Centres are drawn in treatment order so the draw sequence does not depend on MOA names.
    result.treatment_means[control_compound] = Eigen::VectorXd::Zero(dim);
    for (int t = 1; t < cfg.n_treatments; ++t) {
        const auto name = synth_treatment_name(t);
        const auto& moa = moa_of[name];
        if (!moa_centre.count(moa)) {
            moa_centre[moa] = normal_vector(effect_rng, dim, cfg.treatment_effect_scale);
        }
        result.treatment_means[name] =
            moa_centre[moa] + normal_vector(effect_rng, dim, cfg.compound_spread * cfg.treatment_effect_scale);
    }

    EmbeddingTable& table = result.table;
    table.dim = dim;
    table.negative_control_compound = control_compound;
    std::size_t row = 0;
    int next_domain = 0;
    for (int t = 0; t < cfg.n_treatments; ++t) {
        const auto name = synth_treatment_name(t);
        std::vector<int> domains;
        if (t == 0) {
            for (int d = 0; d < cfg.n_domains; ++d) {
                domains.push_back(d);
            }
        } else {
            const int spread = cfg.domains_per_treatment == 0 ? cfg.n_domains : cfg.domains_per_treatment;
            for (int k = 0; k < spread; ++k) {
                domains.push_back((next_domain + k) % cfg.n_domains);
            }
            next_domain = (next_domain + 1) % cfg.n_domains;
        }
        std::sort(domains.begin(), domains.end());
        for (int d : domains) {
            const auto domain = synth_domain_name(d);
            const auto& map = result.nuisance.at(domain);
            for (int c = 0; c < cfg.cells_per_group; ++c) {
                EmbeddingRecord rec;
                char id[32];
                std::snprintf(id, sizeof id, "r%07zu", row++);
                rec.row_id = id;
                rec.domain = domain;
                rec.plate = "P" + std::to_string(d);
                rec.well = name + "_w" + std::to_string(c % cfg.wells_per_group);
                rec.compound = name;
                rec.dose = t == 0 ? "0" : "1";
                rec.treatment = make_treatment(rec.compound, rec.dose);
                if (t != 0) {
                    rec.moa = moa_of[name];
                }
                Eigen::VectorXd z = result.treatment_means[name] + normal_vector(noise_rng, dim, cfg.noise_scale);
                rec.vector = map.apply(z);
                table.records.push_back(std::move(rec));
            }
        }
    }
    table.validate();
    return result;
}

EmbeddingTable invert_nuisance(const EmbeddingTable& table, const std::map<std::string, AffineTransform>& nuisance) {
    std::map<std::string, Eigen::MatrixXd> inverses;
    for (const auto& [domain, map] : nuisance) {
        inverses[domain] = map.M.inverse();
    }
    EmbeddingTable out = table;
    for (auto& rec : out.records) {
        auto it = nuisance.find(rec.domain);
        if (it == nuisance.end()) {
            throw DataError("no ground-truth map for domain '" + rec.domain + "'");
        }
        rec.vector = inverses.at(rec.domain) * (rec.vector - it->second.b);
    }
    return out;
}

nlohmann::json ground_truth_json(const SynthResult& result) {
    nlohmann::json doc;
    nlohmann::json domains = nlohmann::json::array();
    for (const auto& [domain, map] : result.nuisance) {
        std::vector<double> m;
        for (Eigen::Index i = 0; i < map.M.rows(); ++i) {
            for (Eigen::Index j = 0; j < map.M.cols(); ++j) {
                m.push_back(map.M(i, j));
            }
        }
        domains.push_back({{"id", domain}, {"M", m}, {"b", std::vector<double>(map.b.data(), map.b.data() + map.b.size())}});
    }
    doc["nuisance"] = std::move(domains);
    nlohmann::json means = nlohmann::json::object();
    for (const auto& [name, mu] : result.treatment_means) {
        means[name] = std::vector<double>(mu.data(), mu.data() + mu.size());
    }
    doc["treatment_means"] = std::move(means);
    return doc;
}

}
