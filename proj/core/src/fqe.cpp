#include "ohs/fqe.hpp"

#include <algorithm>
#include <set>

#include "ohs/errors.hpp"

namespace ohs {

void FqeConfig::validate() const {
    if (hidden_size < 1 || num_blocks < 0) throw ConfigError("fqe: invalid architecture");
    if (!(learning_rate > 0)) throw ConfigError("fqe: learning_rate must be positive");
    if (learner_steps < 0) throw ConfigError("fqe: learner_steps must be >= 0");
    if (target_update_period < 1) throw ConfigError("fqe: target_update_period must be >= 1");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("fqe: gamma must be in (0, 1]");
    if (batch_size < 1) throw ConfigError("fqe: batch_size must be >= 1");
}

FqeCritic fqe(const Dataset& dataset, const Policy& policy, const FqeConfig& config,
              const AtomGrid& grid, std::string evaluated_policy_ref) {
    auto critics = fqe_step_sweep(dataset, policy, config, grid, {config.learner_steps},
                                  std::move(evaluated_policy_ref));
    return std::move(critics.front());
}

std::vector<FqeCritic> fqe_step_sweep(const Dataset& dataset, const Policy& policy,
                                      const FqeConfig& config, const AtomGrid& grid,
                                      const std::vector<std::int64_t>& checkpoints,
                                      std::string evaluated_policy_ref) {
    config.validate();
    grid.validate();
    if (checkpoints.empty()) throw ConfigError("fqe_step_sweep: no checkpoints");
    if (!std::is_sorted(checkpoints.begin(), checkpoints.end()))
        throw ConfigError("fqe_step_sweep: checkpoints must be ascending");

    const EnvSpec& spec = dataset.env_spec;
    const auto transitions = dataset.all_transitions();
    if (transitions.empty()) throw std::invalid_argument("fqe: empty dataset");

    Rng rng(config.seed);
    CriticState critic = CriticState::init(spec.obs_dim, spec.act_dim, config.hidden_size,
                                           config.num_blocks, grid, config.distributional,
                                           config.learning_rate, rng);

    std::vector<float> losses;
    std::vector<FqeCritic> out;
    std::set<std::int64_t> remaining(checkpoints.begin(), checkpoints.end());

    auto take_due = [&](std::int64_t completed, bool failed) {
        while (!remaining.empty() && (*remaining.begin() <= completed || failed)) {
            auto it = remaining.begin();
            FqeCritic c;
            c.critic_params = critic.params;
            if (config.distributional) c.grid = grid;
            c.evaluated_policy_ref = evaluated_policy_ref;
            c.config = config;
            c.config.learner_steps = *it;
            c.loss_trace = losses;
            c.failed = failed || !c.critic_params.all_finite();
            out.push_back(std::move(c));
            remaining.erase(it);
        }
    };

    const std::int64_t max_steps = checkpoints.back();
    std::vector<std::size_t> indices(static_cast<std::size_t>(config.batch_size));
    take_due(0, false);

    for (std::int64_t step = 0; step < max_steps; ++step) {
        for (auto& idx : indices) idx = rng.below(transitions.size());
        TransitionBatch batch = TransitionBatch::gather(transitions, indices);
        try {
            losses.push_back(critic_update(critic, batch, policy, config.gamma));
            if (step % config.target_update_period == 0) sync_target(critic);
        } catch (const TrainingError&) {
            take_due(max_steps, true);
            return out;
        }
        take_due(step + 1, false);
    }
    return out;
}

}  // namespace ohs
