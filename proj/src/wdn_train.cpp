#include "wdn/wdn_train.hpp"

#include <cmath>

#include "wdn/errors.hpp"
#include "wdn/rmsprop.hpp"

namespace wdn {

Eigen::VectorXd pack(const std::map<std::string, AffineTransform>& transforms) {
    Eigen::Index total = 0;
    for (const auto& entry : transforms) {
        total += entry.second.M.size() + entry.second.b.size();
    }
    Eigen::VectorXd flat(total);
    Eigen::Index offset = 0;
    for (const auto& [domain, t] : transforms) {
        flat.segment(offset, t.M.size()) = t.M.reshaped();
        offset += t.M.size();
        flat.segment(offset, t.b.size()) = t.b;
        offset += t.b.size();
    }
    return flat;
}

void unpack(const Eigen::VectorXd& flat, std::map<std::string, AffineTransform>& transforms) {
    Eigen::Index offset = 0;
    for (auto& [domain, t] : transforms) {
        t.M.reshaped() = flat.segment(offset, t.M.size());
        offset += t.M.size();
        t.b = flat.segment(offset, t.b.size());
        offset += t.b.size();
    }
    if (offset != flat.size()) {
        throw DataError("unpack: flattened transform parameters have the wrong size");
    }
}

Eigen::VectorXd pack(const std::map<CriticKey, CriticNet>& critics) {
    Eigen::Index total = 0;
    for (const auto& entry : critics) {
        const auto& c = entry.second;
        total += c.W1.size() + c.b1.size() + c.w2.size() + 1;
    }
    Eigen::VectorXd flat(total);
    Eigen::Index offset = 0;
    for (const auto& [key, c] : critics) {
        flat.segment(offset, c.W1.size()) = c.W1.reshaped();
        offset += c.W1.size();
        flat.segment(offset, c.b1.size()) = c.b1;
        offset += c.b1.size();
        flat.segment(offset, c.w2.size()) = c.w2;
        offset += c.w2.size();
        flat[offset++] = c.b2;
    }
    return flat;
}

void unpack(const Eigen::VectorXd& flat, std::map<CriticKey, CriticNet>& critics) {
    Eigen::Index offset = 0;
    for (auto& [key, c] : critics) {
        c.W1.reshaped() = flat.segment(offset, c.W1.size());
        offset += c.W1.size();
        c.b1 = flat.segment(offset, c.b1.size());
        offset += c.b1.size();
        c.w2 = flat.segment(offset, c.w2.size());
        offset += c.w2.size();
        c.b2 = flat[offset++];
    }
    if (offset != flat.size()) {
        throw DataError("unpack: flattened critic parameters have the wrong size");
    }
}

MinibatchSampler::MinibatchSampler(const EmbeddingTable& table, const std::vector<CriticKey>& keys, int minibatch) :
    table_(&table), keys_(keys), minibatch_(minibatch)
{
    if (minibatch < 1) {
        throw DataError("minibatch size must be positive");
    }
    auto index = group_index(table);
    for (const auto& key : keys_) {
        for (const auto& domain : {key.d_i, key.d_j}) {
            GroupKey group{key.treatment, domain};
            if (groups_.count(group)) {
                continue;
            }
            auto it = index.find(group);
            if (it == index.end() || it->second.empty()) {
                throw DataError("no rows for treatment '" + key.treatment + "' in domain '" + domain + "'");
            }
            GroupState state;
            state.rows = it->second;
            state.order = state.rows;
            state.cursor = state.rows.size(); // forces a shuffle on first use
            groups_.emplace(group, std::move(state));
        }
    }
}

std::vector<std::size_t> MinibatchSampler::next_rows(const GroupKey& group, Rng& rng) {
    auto& state = groups_.at(group);
    const auto n = static_cast<std::size_t>(minibatch_);
    std::vector<std::size_t> out(n);
    if (state.rows.size() < n) {
        for (auto& r : out) {
            r = state.rows[uniform_index(rng, state.rows.size())];
        }
        return out;
    }
    if (state.cursor + n > state.order.size()) {
        state.order = state.rows;
        shuffle(state.order, rng);
        state.cursor = 0;
    }
    std::copy(state.order.begin() + state.cursor, state.order.begin() + state.cursor + n, out.begin());
    state.cursor += n;
    return out;
}

Minibatches MinibatchSampler::draw(Rng& rng) {
    Minibatches out;
    for (auto& entry : groups_) {
        out.groups.emplace(entry.first, table_->matrix(next_rows(entry.first, rng)));
    }
    for (const auto& key : keys_) {
        out.mixing.emplace(key, draw_mixing_weights(minibatch_, rng));
    }
    return out;
}

TrainerState make_trainer_state(const TrainConfig& config) {
    TrainerState state;
    state.transform_opt = RmsProp({config.lr_transform, config.rmsprop_decay, config.rmsprop_eps});
    state.critic_opt = RmsProp({config.lr_critic, config.rmsprop_decay, config.rmsprop_eps});
    return state;
}

namespace {

std::vector<CriticKey> keys_of(const WdnModel& model) {
    std::vector<CriticKey> keys;
    for (const auto& entry : model.critics) {
        keys.push_back(entry.first);
    }
    return keys;
}

void notify(const std::vector<TrainObserver>& observers, TrainPhase phase, std::int64_t step, std::int64_t cycle, const LossBreakdown& loss) {
    if (observers.empty()) {
        return;
    }
    TrainEvent event{phase, step, cycle, &loss};
    for (const auto& obs : observers) {
        obs(event);
    }
}

void check_loss(const LossBreakdown& loss, std::int64_t step) {
    if (!std::isfinite(loss.total)) {
        throw NumericalError("non-finite loss at step " + std::to_string(step));
    }
}

void check_parameters(const WdnModel& model, std::int64_t step) {
    bool finite = true;
    for (const auto& [domain, t] : model.transforms) {
        finite = finite && t.M.allFinite() && t.b.allFinite();
    }
    for (const auto& [key, c] : model.critics) {
        finite = finite && c.W1.allFinite() && c.b1.allFinite() && c.w2.allFinite() && std::isfinite(c.b2);
    }
    if (!finite) {
        throw NumericalError("non-finite parameters at step " + std::to_string(step));
    }
}

void negate(std::map<CriticKey, CriticNet>& critics) {
    for (auto& entry : critics) {
        auto& c = entry.second;
        c.W1 = -c.W1;
        c.b1 = -c.b1;
        c.w2 = -c.w2;
        c.b2 = -c.b2;
    }
}

LossBreakdown critic_update(WdnModel& model, TrainerState& state, const Minibatches& batches, const TrainConfig& config, bool gradient_reversal) {
    BackwardOptions options;
    options.transform_reg = config.transform_reg;
    options.gradient_reversal = gradient_reversal;
    auto [loss, grads] = backward(model, batches, config.gamma, options);
    if (!gradient_reversal) {
        // Ascent on the objective is descent on its negation.
        negate(grads.critics);
    }
    state.critic_opt.step(model.critics, grads.critics);
    return loss;
}

LossBreakdown transform_update(WdnModel& model, TrainerState& state, const Minibatches& batches, const TrainConfig& config, bool gradient_reversal) {
    BackwardOptions options;
    options.transform_reg = config.transform_reg;
    options.gradient_reversal = gradient_reversal;
    auto [loss, grads] = backward(model, batches, config.gamma, options);
    state.transform_opt.step(model.transforms, grads.transforms);
    return loss;
}

void run_pretraining(WdnModel& model, TrainerState& state, MinibatchSampler& sampler, const TrainConfig& config, Rng& rng, const std::vector<TrainObserver>& observers) {
    for (std::int64_t s = 0; s < config.pretrain_steps; ++s) {
        auto batches = sampler.draw(rng);
        auto loss = critic_update(model, state, batches, config, false);
        ++state.step;
        check_loss(loss, state.step);
        check_parameters(model, state.step);
        notify(observers, TrainPhase::pretrain, state.step, 0, loss);
    }
}

}

WdnModel pretrain_critics(WdnModel model, const EmbeddingTable& table, const TrainConfig& config, Rng& rng, const std::vector<TrainObserver>& observers) {
    config.validate();
    if (config.pretrain_steps == 0 || model.critics.empty()) {
        return model;
    }
    auto state = make_trainer_state(config);
    MinibatchSampler sampler(table, keys_of(model), config.minibatch);
    run_pretraining(model, state, sampler, config, rng, observers);
    return model;
}

LossBreakdown train_cycle(
    WdnModel& model,
    TrainerState& state,
    MinibatchSampler& sampler,
    const TrainConfig& config,
    Rng& rng,
    std::int64_t cycle,
    const std::vector<TrainObserver>& observers,
    bool gradient_reversal)
{
    LossBreakdown last;
    for (int s = 0; s < config.transform_steps_per_cycle; ++s) {
        auto batches = sampler.draw(rng);
        last = transform_update(model, state, batches, config, gradient_reversal);
        ++state.step;
        check_loss(last, state.step);
        check_parameters(model, state.step);
        notify(observers, TrainPhase::transform, state.step, cycle, last);
    }
    for (int s = 0; s < config.critic_steps_per_cycle; ++s) {
        auto batches = sampler.draw(rng);
        auto loss = critic_update(model, state, batches, config, gradient_reversal);
        ++state.step;
        check_loss(loss, state.step);
        check_parameters(model, state.step);
        notify(observers, TrainPhase::critic, state.step, cycle, loss);
        if (config.transform_steps_per_cycle == 0) {
            last = loss;
        }
    }
    return last;
}

TrainResult train(WdnModel model, const EmbeddingTable& table, const TrainConfig& config, Rng& rng, const std::vector<TrainObserver>& observers) {
    config.validate();
    if (model.dim != table.dim) {
        throw DataError("train: model dimension does not match table dimension");
    }
    const auto fingerprint = config_fingerprint(config);

    TrainResult result;
    auto state = make_trainer_state(config);
    auto keys = keys_of(model);

    try {
        if (keys.empty()) {
            // Nothing is replicated across domains, so there is nothing to align.
            result.checkpoints.push_back(make_checkpoint(model, 0, fingerprint));
            result.model = std::move(model);
            return result;
        }

        MinibatchSampler sampler(table, keys, config.minibatch);
        run_pretraining(model, state, sampler, config, rng, observers);
        result.checkpoints.push_back(make_checkpoint(model, 0, fingerprint));
        result.model = model;

        for (std::int64_t cycle = 1; cycle <= config.total_cycles; ++cycle) {
            train_cycle(model, state, sampler, config, rng, cycle, observers);
            if (cycle % config.checkpoint_every == 0 || cycle == config.total_cycles) {
                result.checkpoints.push_back(make_checkpoint(model, cycle, fingerprint));
                result.model = model;
            }
        }
    } catch (const NumericalError& e) {
        result.diverged = true;
        result.message = e.what();
        if (result.checkpoints.empty()) {
            throw;
        }
    }
    return result;
}

EmbeddingTable wdn_apply(const WdnModel& model, const EmbeddingTable& table) {
    if (model.dim != table.dim) {
        throw DataError("wdn_apply: model dimension " + std::to_string(model.dim) + " does not match table dimension " + std::to_string(table.dim));
    }
    Eigen::MatrixXd out(static_cast<Eigen::Index>(table.size()), table.dim);
    for (std::size_t r = 0; r < table.size(); ++r) {
        const auto& rec = table.records[r];
        auto it = model.transforms.find(rec.domain);
        if (it == model.transforms.end()) {
            throw DataError("wdn_apply: no transform for domain '" + rec.domain + "'");
        }
        out.row(r) = it->second.apply(rec.vector).transpose();
    }
    return table.with_vectors(out);
}

}
