#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ohs/distrib.hpp"
#include "ohs/env.hpp"
#include "ohs/policy.hpp"
#include "ohs/train.hpp"

namespace ohs {

struct FqeConfig {
    int hidden_size = 256;
    int num_blocks = 2;
    double learning_rate = 1e-4;
    std::int64_t learner_steps = 10000;
    int target_update_period = 100;
    double gamma = 0.99;
    bool distributional = true;
    std::uint64_t seed = 0;
    int batch_size = 32;  // batches are uniform over transitions with replacement

    void validate() const;
};

struct FqeCritic {
    nn::MlpParams critic_params;
    std::optional<AtomGrid> grid;  // engaged iff distributional
    std::string evaluated_policy_ref;
    FqeConfig config;
    std::vector<float> loss_trace;
    bool failed = false;
};

// Retrain a fresh critic for the frozen evaluation policy from the logged
// dataset. The value update is the same critic_update used by the offline RL
// trainers; the policy receives no updates. Deterministic given config.seed.
FqeCritic fqe(const Dataset& dataset, const Policy& policy, const FqeConfig& config,
              const AtomGrid& grid, std::string evaluated_policy_ref = {});

// One training run snapshotted at each checkpoint (ascending). The snapshot
// at checkpoint k is bitwise identical to fqe() with learner_steps = k and
// the same seed.
std::vector<FqeCritic> fqe_step_sweep(const Dataset& dataset, const Policy& policy,
                                      const FqeConfig& config, const AtomGrid& grid,
                                      const std::vector<std::int64_t>& checkpoints,
                                      std::string evaluated_policy_ref = {});

}  // namespace ohs
