#ifndef WDN_WDN_LOSS_HPP
#define WDN_WDN_LOSS_HPP

#include <map>
#include <vector>

#include <Eigen/Dense>

#include "wdn/data_model.hpp"
#include "wdn/random.hpp"
#include "wdn/wdn_model.hpp"

/**
 * @file wdn_loss.hpp
 * @brief Critic evaluation, one-sided gradient penalty, the averaged Wasserstein objective and its exact gradients.
 *
 * Point sets are matrices with one point per row.
 */

namespace wdn {

/// `f(z)`; throws `DataError` on a dimension mismatch and `NumericalError` on non-finite input.
double critic_forward(const CriticNet& critic, const Eigen::VectorXd& z);

/// `grad_z f(z)`.
Eigen::VectorXd critic_input_gradient(const CriticNet& critic, const Eigen::VectorXd& z);

/// Mean of `f` over `xs` minus mean of `f` over `ys`; both sets must be equal-sized and nonempty.
double critic_loss(const CriticNet& critic, const Eigen::MatrixXd& xs, const Eigen::MatrixXd& ys);

/// One mixing weight per row, iid uniform on [0, 1].
Eigen::VectorXd draw_mixing_weights(Eigen::Index n, Rng& rng);

/// Row k is `eps[k] * xs.row(k) + (1 - eps[k]) * ys.row(k)`.
Eigen::MatrixXd interpolate(const Eigen::MatrixXd& xs, const Eigen::MatrixXd& ys, const Eigen::VectorXd& eps);

/// `interpolate()` with freshly drawn weights.
Eigen::MatrixXd interpolate(const Eigen::MatrixXd& xs, const Eigen::MatrixXd& ys, Rng& rng);

/// Mean over rows of `gamma (G - 1)^2` where `G = ||grad_z f||` exceeds 1, zero elsewhere.
double gradient_penalty(const CriticNet& critic, const Eigen::MatrixXd& points, double gamma);

/**
 * Raw (untransformed) minibatches for every (treatment, domain) group used by the critics,
 * plus one vector of interpolation weights per critic key.
 */
struct Minibatches {
    std::map<GroupKey, Eigen::MatrixXd> groups;
    std::map<CriticKey, Eigen::VectorXd> mixing;
};

struct LossTerm {
    double critic_loss = 0;
    double penalty = 0;
    /// Normalization applied to `critic_loss - penalty` in the total.
    double weight = 0;
};

struct LossBreakdown {
    double total = 0;
    double regularizer = 0;
    std::map<CriticKey, LossTerm> terms;
};

/// Gradient containers reuse the parameter shapes.
struct ModelGradients {
    std::map<std::string, AffineTransform> transforms;
    std::map<CriticKey, CriticNet> critics;
};

/**
 * Averaged objective over replicated treatments:
 * `(1/|T|) sum_t c_t sum_pairs [critic_loss - penalty] + R`, with `c_t = 2 / (|D_t| (|D_t| - 1))`
 * for unordered pairs (pairwise mode) and `1 / (|D_t| (|D_t| - 1))` for ordered pairs (anchored mode).
 * `R` is the optional transform regularizer weighted by `transform_reg`.
 */
LossBreakdown wdn_loss(const WdnModel& model, const Minibatches& batches, double gamma, double transform_reg = 0);

struct BackwardOptions {
    double transform_reg = 0;
    /**
     * Differentiate the sign-flipped critic objective and pass the gradient through a reversal
     * layer before it reaches the transforms. Critic gradients then come out negated while
     * transform gradients are unchanged.
     */
    bool gradient_reversal = false;
};

/**
 * Exact gradients of `wdn_loss()` for every transform and critic parameter.
 * Throws `NumericalError` naming the parameter if any gradient is non-finite.
 */
std::pair<LossBreakdown, ModelGradients> backward(const WdnModel& model, const Minibatches& batches, double gamma, const BackwardOptions& options = {});

/// Zero-initialized gradients shaped like `model`.
ModelGradients zero_gradients(const WdnModel& model);

}

#endif
