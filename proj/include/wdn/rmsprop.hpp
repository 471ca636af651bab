#ifndef WDN_RMSPROP_HPP
#define WDN_RMSPROP_HPP

#include <cmath>
#include <map>
#include <string>

#include <Eigen/Dense>

#include "wdn/errors.hpp"
#include "wdn/wdn_model.hpp"

namespace wdn {

struct RmsPropSettings {
    double lr = 1e-3;
    double decay = 0.9;
    double eps = 1e-8;
};

/**
 * One elementwise RMSProp update:
 * `state <- decay * state + (1 - decay) * grad^2`, then `param <- param - lr * grad / sqrt(state + eps)`.
 */
inline void rmsprop_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, Eigen::VectorXd& state, const RmsPropSettings& settings) {
    if (params.size() != grads.size() || params.size() != state.size()) {
        throw DataError("rmsprop_step: parameter, gradient and state sizes differ");
    }
    state = settings.decay * state + (1 - settings.decay) * grads.cwiseProduct(grads);
    params.array() -= settings.lr * grads.array() / (state.array() + settings.eps).sqrt();
}

/// Flattened views over one parameter class, in sorted key order.
Eigen::VectorXd pack(const std::map<std::string, AffineTransform>& transforms);
void unpack(const Eigen::VectorXd& flat, std::map<std::string, AffineTransform>& transforms);
Eigen::VectorXd pack(const std::map<CriticKey, CriticNet>& critics);
void unpack(const Eigen::VectorXd& flat, std::map<CriticKey, CriticNet>& critics);

/// Optimizer with its own accumulator, for one parameter class.
class RmsProp {
public:
    RmsProp() = default;
    explicit RmsProp(RmsPropSettings settings) : settings_(settings) {}

    template<class Params_>
    void step(Params_& params, const Params_& grads) {
        Eigen::VectorXd flat = pack(params);
        if (state_.size() != flat.size()) {
            state_ = Eigen::VectorXd::Zero(flat.size());
        }
        rmsprop_step(flat, pack(grads), state_, settings_);
        unpack(flat, params);
    }

    const Eigen::VectorXd& state() const {
        return state_;
    }

private:
    RmsPropSettings settings_;
    Eigen::VectorXd state_;
};

}

#endif
