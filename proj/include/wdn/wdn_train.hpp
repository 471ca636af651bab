#ifndef WDN_WDN_TRAIN_HPP
#define WDN_WDN_TRAIN_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "wdn/checkpoint.hpp"
#include "wdn/data_model.hpp"
#include "wdn/random.hpp"
#include "wdn/rmsprop.hpp"
#include "wdn/wdn_loss.hpp"
#include "wdn/wdn_model.hpp"

/**
 * @file wdn_train.hpp
 * @brief Minibatch sampling, critic pre-training and the alternating training schedule.
 */

namespace wdn {

/**
 * Draws fixed-size minibatches from each (treatment, domain) group.
 * Groups smaller than the minibatch are sampled uniformly with replacement;
 * larger groups are walked through a shuffled permutation without replacement,
 * reshuffled whenever fewer than a full minibatch remains.
 */
class MinibatchSampler {
public:
    MinibatchSampler(const EmbeddingTable& table, const std::vector<CriticKey>& keys, int minibatch);

    /// One minibatch per group plus fresh mixing weights per key, consumed in sorted order.
    Minibatches draw(Rng& rng);

    /// Row indices of the next minibatch of one group.
    std::vector<std::size_t> next_rows(const GroupKey& group, Rng& rng);

private:
    struct GroupState {
        std::vector<std::size_t> rows;
        std::vector<std::size_t> order;
        std::size_t cursor = 0;
    };

    const EmbeddingTable* table_;
    std::vector<CriticKey> keys_;
    int minibatch_;
    std::map<GroupKey, GroupState> groups_;
};

enum class TrainPhase { pretrain, transform, critic };

struct TrainEvent {
    TrainPhase phase;
    /// Global update counter across all phases, starting at 1.
    std::int64_t step;
    /// Alternation cycle (0 during pre-training).
    std::int64_t cycle;
    const LossBreakdown* loss;
};

using TrainObserver = std::function<void(const TrainEvent&)>;

/// Mutable optimizer state carried across calls.
struct TrainerState {
    RmsProp transform_opt;
    RmsProp critic_opt;
    std::int64_t step = 0;
};

/// Optimizers configured from `config`.
TrainerState make_trainer_state(const TrainConfig& config);

/**
 * Update only the critics for `config.pretrain_steps` steps, each ascending
 * `critic_loss - penalty` on a fresh set of minibatches. Transforms are untouched.
 */
WdnModel pretrain_critics(WdnModel model, const EmbeddingTable& table, const TrainConfig& config, Rng& rng, const std::vector<TrainObserver>& observers = {});

/**
 * One alternation cycle: `transform_steps_per_cycle` descent steps on the transforms followed by
 * `critic_steps_per_cycle` ascent steps on the critics.
 * With `gradient_reversal` the critic update uses the sign-flipped objective with both optimizers
 * descending; the result is bit-identical to the default two-optimizer form.
 */
LossBreakdown train_cycle(
    WdnModel& model,
    TrainerState& state,
    MinibatchSampler& sampler,
    const TrainConfig& config,
    Rng& rng,
    std::int64_t cycle,
    const std::vector<TrainObserver>& observers = {},
    bool gradient_reversal = false);

struct TrainResult {
    std::vector<Checkpoint> checkpoints;
    WdnModel model;
    /// Set when training stopped on a non-finite loss or gradient; `checkpoints` ends at the last good one.
    bool diverged = false;
    std::string message;
};

/**
 * Pre-train the critics (if `config.pretrain_steps > 0`), emit the step-0 checkpoint and then run
 * `config.total_cycles` alternation cycles, emitting a checkpoint every `config.checkpoint_every` cycles
 * and after the final cycle. Checkpoint steps count cycles.
 */
TrainResult train(WdnModel model, const EmbeddingTable& table, const TrainConfig& config, Rng& rng, const std::vector<TrainObserver>& observers = {});

/// Map every row through its domain's transform; throws `DataError` for an unknown domain.
EmbeddingTable wdn_apply(const WdnModel& model, const EmbeddingTable& table);

}

#endif
