#include "wdn/wdn_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "wdn/errors.hpp"

namespace wdn {

namespace {

struct Fnv {
    std::uint64_t state = 0xcbf29ce484222325ULL;

    void bytes(const void* data, std::size_t n) {
        auto ptr = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            state ^= ptr[i];
            state *= 0x100000001b3ULL;
        }
    }

    void text(const std::string& s) {
        bytes(s.data(), s.size());
        bytes("\0", 1);
    }

    template<typename T>
    void value(T v) {
        bytes(&v, sizeof(T));
    }
};

}

CriticNet CriticNet::random(Eigen::Index hidden, Eigen::Index dim, Rng& rng) {
    CriticNet out = zero(hidden, dim);
    const double w1_scale = 1.0 / std::sqrt(static_cast<double>(dim));
    for (Eigen::Index h = 0; h < hidden; ++h) {
        for (Eigen::Index c = 0; c < dim; ++c) {
            out.W1(h, c) = w1_scale * standard_normal(rng);
        }
    }
    for (Eigen::Index h = 0; h < hidden; ++h) {
        out.w2[h] = 0.5 * standard_normal(rng);
    }
    return out;
}

std::string to_string(LossMode mode) {
    return mode == LossMode::pairwise ? "pairwise" : "anchored";
}

LossMode loss_mode_from_string(const std::string& name) {
    if (name == "pairwise") {
        return LossMode::pairwise;
    }
    if (name == "anchored") {
        return LossMode::anchored;
    }
    throw DataError("unknown loss mode '" + name + "' (expected pairwise or anchored)");
}

std::vector<CriticKey> critic_keys(const EmbeddingTable& table, LossMode mode) {
    std::vector<CriticKey> keys;
    for (const auto& rep : replicated_treatments(table)) {
        const auto& ds = rep.domains;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            for (std::size_t j = 0; j < ds.size(); ++j) {
                if (i == j || (mode == LossMode::pairwise && j < i)) {
                    continue;
                }
                keys.push_back({rep.treatment, ds[i], ds[j]});
            }
        }
    }
    std::sort(keys.begin(), keys.end());
    return keys;
}

WdnModel make_model(const EmbeddingTable& table, LossMode mode, Eigen::Index hidden, Rng& rng) {
    if (hidden <= 0) {
        throw DataError("critic hidden width must be positive");
    }
    WdnModel model;
    model.dim = table.dim;
    model.mode = mode;
    for (const auto& d : domains_of(table)) {
        model.transforms.emplace(d, AffineTransform::identity(table.dim));
    }
    for (const auto& key : critic_keys(table, mode)) {
        model.critics.emplace(key, CriticNet::random(hidden, table.dim, rng));
    }
    return model;
}

void TrainConfig::validate() const {
    auto fail = [](const std::string& field, const std::string& why) {
        throw DataError("TrainConfig." + field + ": " + why);
    };
    if (minibatch < 2) {
        fail("minibatch", "must be at least 2");
    }
    if (!(gamma >= 0) || !std::isfinite(gamma)) {
        fail("gamma", "must be a nonnegative finite number");
    }
    if (pretrain_steps < 0) {
        fail("pretrain_steps", "must be nonnegative");
    }
    if (transform_steps_per_cycle < 0) {
        fail("transform_steps_per_cycle", "must be nonnegative");
    }
    if (critic_steps_per_cycle < 0) {
        fail("critic_steps_per_cycle", "must be nonnegative");
    }
    // A zero transform rate is allowed; it freezes the affine maps.
    if (!(lr_transform >= 0) || !std::isfinite(lr_transform)) {
        fail("lr_transform", "must be a nonnegative finite number");
    }
    if (!(lr_critic > 0) || !std::isfinite(lr_critic)) {
        fail("lr_critic", "must be positive");
    }
    if (!(rmsprop_decay >= 0 && rmsprop_decay < 1)) {
        fail("rmsprop_decay", "must lie in [0, 1)");
    }
    if (!(rmsprop_eps > 0)) {
        fail("rmsprop_eps", "must be positive");
    }
    if (total_cycles < 0) {
        fail("total_cycles", "must be nonnegative");
    }
    if (checkpoint_every < 1) {
        fail("checkpoint_every", "must be at least 1");
    }
    if (hidden < 1) {
        fail("hidden", "must be at least 1");
    }
    if (!(transform_reg >= 0)) {
        fail("transform_reg", "must be nonnegative");
    }
}

std::string config_fingerprint(const TrainConfig& c) {
    Fnv h;
    h.value(c.minibatch);
    h.value(c.gamma);
    h.value(c.pretrain_steps);
    h.value(c.transform_steps_per_cycle);
    h.value(c.critic_steps_per_cycle);
    h.value(c.lr_transform);
    h.value(c.lr_critic);
    h.value(c.rmsprop_decay);
    h.value(c.rmsprop_eps);
    h.value(c.total_cycles);
    h.value(c.checkpoint_every);
    h.value(c.seed);
    h.value(static_cast<std::int64_t>(c.hidden));
    h.text(to_string(c.loss_mode));
    h.value(c.transform_reg);
    std::ostringstream out;
    out << std::hex;
    out.width(16);
    out.fill('0');
    out << h.state;
    return out.str();
}

std::uint64_t transform_hash(const WdnModel& model) {
    Fnv h;
    for (const auto& [domain, t] : model.transforms) {
        h.text(domain);
        h.bytes(t.M.data(), sizeof(double) * t.M.size());
        h.bytes(t.b.data(), sizeof(double) * t.b.size());
    }
    return h.state;
}

}
