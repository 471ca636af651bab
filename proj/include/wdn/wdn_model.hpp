#ifndef WDN_WDN_MODEL_HPP
#define WDN_WDN_MODEL_HPP

#include <compare>
#include <cstdint>
#include <map>
#include <string>

#include <Eigen/Dense>

#include "wdn/data_model.hpp"
#include "wdn/random.hpp"

/**
 * @file wdn_model.hpp
 * @brief Parameters of the Wasserstein distance network: per-domain affine maps and per-pair critics.
 */

namespace wdn {

/// `x -> M x + b`.
struct AffineTransform {
    Eigen::MatrixXd M;
    Eigen::VectorXd b;

    static AffineTransform identity(Eigen::Index dim) {
        return {Eigen::MatrixXd::Identity(dim, dim), Eigen::VectorXd::Zero(dim)};
    }

    static AffineTransform zero(Eigen::Index dim) {
        return {Eigen::MatrixXd::Zero(dim, dim), Eigen::VectorXd::Zero(dim)};
    }

    Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
        return M * x + b;
    }

    /// Apply to every row of `X`.
    Eigen::MatrixXd apply_rows(const Eigen::MatrixXd& X) const {
        return (X * M.transpose()).rowwise() + b.transpose();
    }
};

/**
 * Two-layer critic `f(z) = w2 . softplus(W1 z + b1) + b2`.
 * Its input gradient is `W1^T (w2 * sigmoid(W1 z + b1))`.
 */
struct CriticNet {
    Eigen::MatrixXd W1; // hidden x dim
    Eigen::VectorXd b1;
    Eigen::VectorXd w2;
    double b2 = 0;

    Eigen::Index hidden() const {
        return W1.rows();
    }

    Eigen::Index dim() const {
        return W1.cols();
    }

    static CriticNet zero(Eigen::Index hidden, Eigen::Index dim) {
        return {Eigen::MatrixXd::Zero(hidden, dim), Eigen::VectorXd::Zero(hidden), Eigen::VectorXd::Zero(hidden), 0.0};
    }

    /// `W1 ~ N(0, 1/dim)`, `w2 ~ N(0, 1/4)`, biases zero.
    static CriticNet random(Eigen::Index hidden, Eigen::Index dim, Rng& rng);
};

enum class LossMode {
    /// Average over unordered domain pairs of W(A_i(nu_i), A_j(nu_j)).
    pairwise,
    /// Average over ordered domain pairs of W(nu_i, A_j(nu_j)).
    anchored
};

std::string to_string(LossMode mode);
LossMode loss_mode_from_string(const std::string& name);

/**
 * Critic identity. In pairwise mode `d_i < d_j` and each pair appears once;
 * in anchored mode the pair is ordered, with `d_i` the untransformed side.
 */
struct CriticKey {
    std::string treatment;
    std::string d_i;
    std::string d_j;

    auto operator<=>(const CriticKey&) const = default;
};

struct WdnModel {
    Eigen::Index dim = 0;
    LossMode mode = LossMode::pairwise;
    std::map<std::string, AffineTransform> transforms;
    std::map<CriticKey, CriticNet> critics;
};

/// Critic keys implied by the replicated treatments of `table` under `mode`.
std::vector<CriticKey> critic_keys(const EmbeddingTable& table, LossMode mode);

/**
 * Identity transforms for every domain of `table` plus one freshly initialized critic
 * for every key from `critic_keys()`. Critics are drawn in sorted key order.
 */
WdnModel make_model(const EmbeddingTable& table, LossMode mode, Eigen::Index hidden, Rng& rng);

struct TrainConfig {
    int minibatch = 100;
    double gamma = 10;
    std::int64_t pretrain_steps = 100000;
    int transform_steps_per_cycle = 50;
    int critic_steps_per_cycle = 1;
    double lr_transform = 3e-6;
    double lr_critic = 1e-3;
    double rmsprop_decay = 0.9;
    double rmsprop_eps = 1e-8;
    std::int64_t total_cycles = 2000;
    std::int64_t checkpoint_every = 50;
    std::uint64_t seed = 0;
    Eigen::Index hidden = 2;
    LossMode loss_mode = LossMode::pairwise;
    /// Weight of the optional `sum_d ||M_d - I||_F^2 + ||b_d||^2` penalty; zero disables it.
    double transform_reg = 0;

    /// Throws `DataError` naming the first invalid field.
    void validate() const;
};

/// Stable hex digest of every field, used to tag checkpoints.
std::string config_fingerprint(const TrainConfig& config);

/// Bitwise digest of all transform parameters, for detecting any change.
std::uint64_t transform_hash(const WdnModel& model);

}

#endif
