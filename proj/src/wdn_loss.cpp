#include "wdn/wdn_loss.hpp"

#include <cmath>
#include <string>

#include "wdn/errors.hpp"

namespace wdn {

namespace {

double softplus(double u) {
    return std::max(u, 0.0) + std::log1p(std::exp(-std::abs(u)));
}

double sigmoid(double u) {
    if (u >= 0) {
        return 1 / (1 + std::exp(-u));
    }
    const double e = std::exp(u);
    return e / (1 + e);
}

Eigen::MatrixXd preactivations(const CriticNet& c, const Eigen::MatrixXd& points) {
    return (points * c.W1.transpose()).rowwise() + c.b1.transpose();
}

void check_shapes(const CriticNet& c, const Eigen::MatrixXd& xs, const Eigen::MatrixXd& ys) {
    if (xs.rows() != ys.rows()) {
        throw DataError("critic batches differ in size: " + std::to_string(xs.rows()) + " vs " + std::to_string(ys.rows()));
    }
    if (xs.rows() == 0) {
        throw DataError("critic batches are empty");
    }
    if (xs.cols() != c.dim() || ys.cols() != c.dim()) {
        throw DataError("critic dimension " + std::to_string(c.dim()) + " does not match batch dimension");
    }
}

std::string key_path(const CriticKey& key) {
    return "critics[" + key.treatment + "|" + key.d_i + "|" + key.d_j + "]";
}

struct TermValues {
    double critic_loss = 0;
    double penalty = 0;
};

/**
 * Forward pass for one critic term and, when `upstream` is nonzero, accumulation of
 * `upstream * d(critic_loss - penalty)` into the critic gradient and the gradients with
 * respect to the (already transformed) points in `X` and `Y`.
 */
TermValues evaluate_term(
    const CriticNet& c,
    const Eigen::MatrixXd& X,
    const Eigen::MatrixXd& Y,
    const Eigen::VectorXd& eps,
    double gamma,
    double upstream,
    CriticNet* dcritic,
    Eigen::MatrixXd* dX,
    Eigen::MatrixXd* dY)
{
    const Eigen::Index n = X.rows();
    const double inv_n = 1.0 / static_cast<double>(n);

    Eigen::MatrixXd UX = preactivations(c, X);
    Eigen::MatrixXd UY = preactivations(c, Y);
    Eigen::MatrixXd SX = UX.unaryExpr(&softplus);
    Eigen::MatrixXd SY = UY.unaryExpr(&softplus);

    TermValues out;
    out.critic_loss = ((SX * c.w2).array() + c.b2).mean() - ((SY * c.w2).array() + c.b2).mean();

    Eigen::MatrixXd Z(n, X.cols());
    for (Eigen::Index k = 0; k < n; ++k) {
        Z.row(k) = eps[k] * X.row(k) + (1 - eps[k]) * Y.row(k);
    }
    Eigen::MatrixXd sigZ = preactivations(c, Z).unaryExpr(&sigmoid);
    Eigen::MatrixXd VZ = sigZ * c.w2.asDiagonal();
    Eigen::MatrixXd grads = VZ * c.W1;
    Eigen::VectorXd norms = grads.rowwise().norm();

    double penalty = 0;
    for (Eigen::Index k = 0; k < n; ++k) {
        if (norms[k] > 1) {
            penalty += gamma * (norms[k] - 1) * (norms[k] - 1);
        }
    }
    out.penalty = penalty * inv_n;

    if (upstream == 0 || dcritic == nullptr) {
        return out;
    }

    const double a = upstream * inv_n;
    const Eigen::MatrixXd sigX = UX.unaryExpr(&sigmoid);
    const Eigen::MatrixXd sigY = UY.unaryExpr(&sigmoid);

    dcritic->w2 += a * (SX.colwise().sum() - SY.colwise().sum()).transpose();
    // b2 cancels between the two means.

    Eigen::MatrixXd DUX = a * (sigX * c.w2.asDiagonal());
    Eigen::MatrixXd DUY = -a * (sigY * c.w2.asDiagonal());
    dcritic->b1 += DUX.colwise().sum().transpose() + DUY.colwise().sum().transpose();
    dcritic->W1 += DUX.transpose() * X + DUY.transpose() * Y;
    *dX += DUX * c.W1;
    *dY += DUY * c.W1;

    for (Eigen::Index k = 0; k < n; ++k) {
        const double G = norms[k];
        if (!(G > 1)) {
            continue;
        }
        const double coef = -a * 2 * gamma * (G - 1) / G;
        const Eigen::VectorXd r = coef * grads.row(k).transpose();
        const Eigen::VectorXd v = VZ.row(k).transpose();
        const Eigen::VectorXd s = sigZ.row(k).transpose();

        dcritic->W1 += v * r.transpose();
        const Eigen::VectorXd q = c.W1 * r;
        const Eigen::VectorXd p = (q.array() * c.w2.array() * s.array() * (1 - s.array())).matrix();
        dcritic->W1 += p * Z.row(k);
        dcritic->b1 += p;
        dcritic->w2 += (q.array() * s.array()).matrix();

        const Eigen::RowVectorXd dz = (c.W1.transpose() * p).transpose();
        dX->row(k) += eps[k] * dz;
        dY->row(k) += (1 - eps[k]) * dz;
    }
    return out;
}

struct Weights {
    std::map<CriticKey, double> per_key;
};

Weights term_weights(const WdnModel& model) {
    std::map<std::string, std::size_t> keys_per_treatment;
    for (const auto& entry : model.critics) {
        ++keys_per_treatment[entry.first.treatment];
    }
    Weights out;
    const double ntreat = static_cast<double>(keys_per_treatment.size());
    for (const auto& entry : model.critics) {
        out.per_key[entry.first] = 1.0 / (ntreat * static_cast<double>(keys_per_treatment[entry.first.treatment]));
    }
    return out;
}

const Eigen::MatrixXd& find_group(const Minibatches& batches, const std::string& treatment, const std::string& domain) {
    auto it = batches.groups.find({treatment, domain});
    if (it == batches.groups.end()) {
        throw DataError("missing minibatch for treatment '" + treatment + "' in domain '" + domain + "'");
    }
    return it->second;
}

const Eigen::VectorXd& find_mixing(const Minibatches& batches, const CriticKey& key) {
    auto it = batches.mixing.find(key);
    if (it == batches.mixing.end()) {
        throw DataError("missing interpolation weights for " + key_path(key));
    }
    return it->second;
}

const AffineTransform& find_transform(const WdnModel& model, const std::string& domain) {
    auto it = model.transforms.find(domain);
    if (it == model.transforms.end()) {
        throw DataError("no transform for domain '" + domain + "'");
    }
    return it->second;
}

double regularizer(const WdnModel& model, double weight) {
    if (weight == 0) {
        return 0;
    }
    double total = 0;
    for (const auto& [domain, t] : model.transforms) {
        total += (t.M - Eigen::MatrixXd::Identity(t.M.rows(), t.M.cols())).squaredNorm() + t.b.squaredNorm();
    }
    return weight * total;
}

void check_finite(const Eigen::MatrixXd& values, const std::string& path) {
    if (!values.allFinite()) {
        throw NumericalError("non-finite gradient in " + path);
    }
}

LossBreakdown run(const WdnModel& model, const Minibatches& batches, double gamma, const BackwardOptions& options, ModelGradients* grads) {
    LossBreakdown out;
    const auto weights = term_weights(model);
    const double sign = options.gradient_reversal ? -1.0 : 1.0;

    for (const auto& [key, critic] : model.critics) {
        const auto& raw_x = find_group(batches, key.treatment, key.d_i);
        const auto& raw_y = find_group(batches, key.treatment, key.d_j);
        check_shapes(critic, raw_x, raw_y);
        const auto& eps = find_mixing(batches, key);
        if (eps.size() != raw_x.rows()) {
            throw DataError("interpolation weights for " + key_path(key) + " do not match the minibatch size");
        }

        const auto& ti = find_transform(model, key.d_i);
        const auto& tj = find_transform(model, key.d_j);
        const bool transform_x = model.mode == LossMode::pairwise;
        Eigen::MatrixXd X = transform_x ? ti.apply_rows(raw_x) : raw_x;
        Eigen::MatrixXd Y = tj.apply_rows(raw_y);

        LossTerm term;
        term.weight = weights.per_key.at(key);
        TermValues values;
        if (grads) {
            Eigen::MatrixXd dX = Eigen::MatrixXd::Zero(X.rows(), X.cols());
            Eigen::MatrixXd dY = Eigen::MatrixXd::Zero(Y.rows(), Y.cols());
            values = evaluate_term(critic, X, Y, eps, gamma, sign * term.weight, &grads->critics.at(key), &dX, &dY);

            // The reversal layer sits between the transformed points and the critic.
            if (options.gradient_reversal) {
                dX = -dX;
                dY = -dY;
            }
            if (transform_x) {
                auto& gi = grads->transforms.at(key.d_i);
                gi.M += dX.transpose() * raw_x;
                gi.b += dX.colwise().sum().transpose();
            }
            auto& gj = grads->transforms.at(key.d_j);
            gj.M += dY.transpose() * raw_y;
            gj.b += dY.colwise().sum().transpose();
        } else {
            values = evaluate_term(critic, X, Y, eps, gamma, 0, nullptr, nullptr, nullptr);
        }
        term.critic_loss = values.critic_loss;
        term.penalty = values.penalty;
        out.total += term.weight * (term.critic_loss - term.penalty);
        out.terms.emplace(key, term);
    }

    out.regularizer = regularizer(model, options.transform_reg);
    out.total += out.regularizer;

    if (grads) {
        if (options.transform_reg != 0) {
            for (auto& [domain, g] : grads->transforms) {
                const auto& t = model.transforms.at(domain);
                g.M += 2 * options.transform_reg * (t.M - Eigen::MatrixXd::Identity(t.M.rows(), t.M.cols()));
                g.b += 2 * options.transform_reg * t.b;
            }
        }
        for (const auto& [domain, g] : grads->transforms) {
            check_finite(g.M, "transforms[" + domain + "].M");
            check_finite(g.b, "transforms[" + domain + "].b");
        }
        for (const auto& [key, g] : grads->critics) {
            check_finite(g.W1, key_path(key) + ".W1");
            check_finite(g.b1, key_path(key) + ".b1");
            check_finite(g.w2, key_path(key) + ".w2");
            if (!std::isfinite(g.b2)) {
                throw NumericalError("non-finite gradient in " + key_path(key) + ".b2");
            }
        }
    }
    return out;
}

}

double critic_forward(const CriticNet& critic, const Eigen::VectorXd& z) {
    if (z.size() != critic.dim()) {
        throw DataError("critic_forward: input dimension " + std::to_string(z.size()) + " does not match critic dimension " + std::to_string(critic.dim()));
    }
    if (!z.allFinite()) {
        throw NumericalError("critic_forward: non-finite input");
    }
    Eigen::VectorXd u = critic.W1 * z + critic.b1;
    return critic.w2.dot(u.unaryExpr(&softplus)) + critic.b2;
}

Eigen::VectorXd critic_input_gradient(const CriticNet& critic, const Eigen::VectorXd& z) {
    if (z.size() != critic.dim()) {
        throw DataError("critic_input_gradient: input dimension does not match critic dimension");
    }
    Eigen::VectorXd u = critic.W1 * z + critic.b1;
    return critic.W1.transpose() * (critic.w2.array() * u.unaryExpr(&sigmoid).array()).matrix();
}

double critic_loss(const CriticNet& critic, const Eigen::MatrixXd& xs, const Eigen::MatrixXd& ys) {
    check_shapes(critic, xs, ys);
    const Eigen::VectorXd fx = (preactivations(critic, xs).unaryExpr(&softplus) * critic.w2).array() + critic.b2;
    const Eigen::VectorXd fy = (preactivations(critic, ys).unaryExpr(&softplus) * critic.w2).array() + critic.b2;
    return fx.mean() - fy.mean();
}

Eigen::VectorXd draw_mixing_weights(Eigen::Index n, Rng& rng) {
    Eigen::VectorXd eps(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        eps[k] = uniform01(rng);
    }
    return eps;
}

Eigen::MatrixXd interpolate(const Eigen::MatrixXd& xs, const Eigen::MatrixXd& ys, const Eigen::VectorXd& eps) {
    if (xs.rows() != ys.rows() || xs.cols() != ys.cols() || eps.size() != xs.rows()) {
        throw DataError("interpolate: point sets and weights must have matching sizes");
    }
    Eigen::MatrixXd out(xs.rows(), xs.cols());
    for (Eigen::Index k = 0; k < xs.rows(); ++k) {
        out.row(k) = eps[k] * xs.row(k) + (1 - eps[k]) * ys.row(k);
    }
    return out;
}

Eigen::MatrixXd interpolate(const Eigen::MatrixXd& xs, const Eigen::MatrixXd& ys, Rng& rng) {
    if (xs.rows() != ys.rows()) {
        throw DataError("interpolate: point sets differ in size");
    }
    return interpolate(xs, ys, draw_mixing_weights(xs.rows(), rng));
}

double gradient_penalty(const CriticNet& critic, const Eigen::MatrixXd& points, double gamma) {
    if (points.rows() == 0) {
        throw DataError("gradient_penalty: no points");
    }
    if (points.cols() != critic.dim()) {
        throw DataError("gradient_penalty: point dimension does not match critic dimension");
    }
    double total = 0;
    for (Eigen::Index k = 0; k < points.rows(); ++k) {
        const double G = critic_input_gradient(critic, points.row(k).transpose()).norm();
        if (G > 1) {
            total += gamma * (G - 1) * (G - 1);
        }
    }
    return total / static_cast<double>(points.rows());
}

ModelGradients zero_gradients(const WdnModel& model) {
    ModelGradients out;
    for (const auto& [domain, t] : model.transforms) {
        out.transforms.emplace(domain, AffineTransform::zero(t.M.rows()));
    }
    for (const auto& [key, c] : model.critics) {
        out.critics.emplace(key, CriticNet::zero(c.hidden(), c.dim()));
    }
    return out;
}

LossBreakdown wdn_loss(const WdnModel& model, const Minibatches& batches, double gamma, double transform_reg) {
    BackwardOptions options;
    options.transform_reg = transform_reg;
    return run(model, batches, gamma, options, nullptr);
}

std::pair<LossBreakdown, ModelGradients> backward(const WdnModel& model, const Minibatches& batches, double gamma, const BackwardOptions& options) {
    auto grads = zero_gradients(model);
    auto loss = run(model, batches, gamma, options, &grads);
    return {std::move(loss), std::move(grads)};
}

}
