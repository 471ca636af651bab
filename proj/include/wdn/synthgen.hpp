#ifndef WDN_SYNTHGEN_HPP
#define WDN_SYNTHGEN_HPP

#include <cstdint>
#include <map>
#include <string>

#include "json.hpp"

#include "wdn/data_model.hpp"
#include "wdn/wdn_model.hpp"

namespace wdn {

/// Synthetic embeddings with known treatment effects and a known affine nuisance per domain.
struct SynthConfig {
    int dim = 16;
    int n_domains = 3;
    /// Includes the negative control.
    int n_treatments = 7;
    /// Non-control treatments per MOA; consecutive treatments share an MOA.
    int compounds_per_moa = 2;
    /// Explicit MOA per non-control treatment name; overrides `compounds_per_moa`.
    std::map<std::string, std::string> moa_assignment;
    /// Domains each non-control treatment appears in, assigned round-robin; 0 means all. The control is in all.
    int domains_per_treatment = 0;
    int cells_per_group = 500;
    int wells_per_group = 5;
    double treatment_effect_scale = 1.0;
    /// Spread of compounds around their MOA centre, as a fraction of the effect scale.
    double compound_spread = 0.5;
    double nuisance_scale = 0.3;
    double noise_scale = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
};

SynthConfig synth_config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const SynthConfig& cfg);

struct SynthResult {
    EmbeddingTable table;
    /// Ground-truth nuisance `x -> M* x + b*` per domain.
    std::map<std::string, AffineTransform> nuisance;
    /// Per-treatment mean before the nuisance is applied.
    std::map<std::string, Eigen::VectorXd> treatment_means;
};

std::string synth_domain_name(int d);
std::string synth_treatment_name(int t);

SynthResult generate(const SynthConfig& cfg);

/// Inverse ground-truth map `(M*)^-1 (x - b*)` applied to every row.
EmbeddingTable invert_nuisance(const EmbeddingTable& table, const std::map<std::string, AffineTransform>& nuisance);

nlohmann::json ground_truth_json(const SynthResult& result);

}

#endif
