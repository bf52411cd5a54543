#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ohs/distrib.hpp"
#include "ohs/env.hpp"
#include "ohs/nn.hpp"
#include "ohs/policy.hpp"

namespace ohs {

enum class Algorithm { BC, CRR, D4PG };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& s);

struct HyperparameterSetting {
    Algorithm algorithm = Algorithm::BC;
    int hidden_size = 64;
    int num_blocks = 1;
    double learning_rate = 1e-3;
    std::int64_t learner_steps = 2000;
    std::optional<double> beta;  // CRR only
    std::uint64_t seed = 0;

    void validate() const;
    // canonical id, e.g. "crr_h64_b1_lr0.001_beta0.1_s2000"; excludes the seed
    std::string policy_id() const;
};

struct TrainerConfig {
    double gamma = 0.99;
    int batch_size = 32;
    int target_update_period = 100;
    int crr_advantage_samples = 4;
    double crr_weight_cap = 20.0;

    void validate() const;
};

struct PolicyArtifact {
    HyperparameterSetting setting;
    nn::MlpParams policy_params;        // action-mean network (pre-squash)
    std::vector<float> policy_log_std;  // Gaussian heads; empty for D4PG
    nn::MlpParams orl_critic_params;    // output dim = n_atoms
    AtomGrid grid;
    std::vector<float> critic_losses;
    std::vector<float> policy_losses;
    bool failed = false;
    std::string policy_id;

    MlpPolicy make_policy(const EnvSpec& spec) const;
};

// Atom support sized to the achievable discounted-return range of the
// environment, widened by 10% of the span on both sides.
AtomGrid default_atom_grid(const Environment& env, double gamma, int n_atoms = 51);

struct TransitionBatch {
    nn::MatF obs;
    nn::MatF action;
    nn::VecF reward;
    nn::MatF next_obs;
    nn::VecF terminal;  // 0/1

    Eigen::Index size() const { return obs.rows(); }
    static TransitionBatch gather(const std::vector<const Transition*>& transitions,
                                  const std::vector<std::size_t>& indices);
};

// --- pure loss/gradient computations (finite-difference checkable) ---

template <typename T>
struct CriticLoss {
    T loss;
    nn::MlpParamsT<T> grads;
};

// Eq.-1 style distributional critic loss: mean over the batch of the
// cross-entropy between the critic's logits at (s, a) and the projection of
// r + discount * Z_target(s', a'), with discount 0 at terminal transitions.
// Targets come from the target network and are constants.
template <typename T>
CriticLoss<T> critic_loss_grads(const nn::MlpParamsT<T>& critic,
                                const nn::MlpParamsT<T>& target_critic, const nn::Mat<T>& obs,
                                const nn::Mat<T>& action, const nn::Vec<T>& reward,
                                const nn::Mat<T>& next_obs, const nn::Mat<T>& next_action,
                                const nn::Vec<T>& terminal, const AtomGrid& grid, T gamma);

// Squared-error variant for the non-distributional critic (output dim 1).
template <typename T>
CriticLoss<T> critic_loss_grads_scalar(const nn::MlpParamsT<T>& critic,
                                       const nn::MlpParamsT<T>& target_critic,
                                       const nn::Mat<T>& obs, const nn::Mat<T>& action,
                                       const nn::Vec<T>& reward, const nn::Mat<T>& next_obs,
                                       const nn::Mat<T>& next_action, const nn::Vec<T>& terminal,
                                       T gamma);

template <typename T>
struct PolicyLoss {
    T loss;
    nn::MlpParamsT<T> net_grads;
    std::vector<T> log_std_grads;  // empty for deterministic heads
};

// tanh-preimage of an action living inside [low, high]
template <typename T>
nn::Mat<T> squash_preimage(const nn::Mat<T>& action, const nn::Vec<T>& low,
                           const nn::Vec<T>& high);

// Weighted Gaussian negative log-likelihood of pre-squash targets:
//   (1/B) sum_b w_b sum_d [ 0.5 ((u_bd - mu_bd)/sigma_d)^2 + log sigma_d ]
// with state-independent log-std. Weights are constants; w = 1 gives the BC
// update, CRR supplies advantage weights.
template <typename T>
PolicyLoss<T> gaussian_nll_loss_grads(const nn::MlpParamsT<T>& mean_net,
                                      const std::vector<T>& log_std, const nn::Mat<T>& obs,
                                      const nn::Mat<T>& u_target, const nn::Vec<T>& weights);

// D4PG objective J = (1/B) sum_b mean(Z_theta(s_b, squash(pi(s_b)))); returns
// loss = -J and its gradient w.r.t. the policy network only (critic frozen).
template <typename T>
PolicyLoss<T> d4pg_loss_grads(const nn::MlpParamsT<T>& policy_net,
                              const nn::MlpParamsT<T>& critic, const nn::Mat<T>& obs,
                              const AtomGrid& grid, const nn::Vec<T>& low,
                              const nn::Vec<T>& high);

// --- stateful updates ---

// Online critic, its delayed target copy, and optimizer state. Shared by the
// offline RL trainers and FQE: both route their value updates through
// critic_update on this struct.
struct CriticState {
    nn::MlpParams params;
    nn::MlpParams target;
    nn::AdamState adam;
    AtomGrid grid;
    bool distributional = true;
    double learning_rate = 1e-4;

    static CriticState init(int obs_dim, int act_dim, int hidden_size, int num_blocks,
                            const AtomGrid& grid, bool distributional, double learning_rate,
                            Rng& rng);
};

// One gradient step on the shared value objective given the evaluation
// actions a' = pi(s'); returns the batch loss.
float critic_update(CriticState& critic, const TransitionBatch& batch,
                    const nn::MatF& next_actions, double gamma);
// Computes a' from the policy (batched for MlpPolicy), then delegates.
float critic_update(CriticState& critic, const TransitionBatch& batch, const Policy& policy,
                    double gamma);
void sync_target(CriticState& critic);

// Number of critic evaluations made by policy-update code since process
// start; BC must never advance it.
std::uint64_t policy_update_critic_reads();

// Gaussian policy head under training.
struct GaussianHead {
    nn::MlpParams mean_net;
    std::vector<float> log_std;
    nn::AdamState net_adam;
    nn::AdamState log_std_adam;
};

inline constexpr float kLogStdMin = -5.0f;
inline constexpr float kLogStdMax = 2.0f;

// One BC step: maximize log-likelihood of logged actions. The critic is
// never consulted.
float bc_policy_update(GaussianHead& head, const TransitionBatch& batch, const EnvSpec& spec,
                       double learning_rate);

struct CrrWeight {
    double weight;
    double advantage;
    std::vector<std::vector<float>> sampled_actions;  // the m policy samples used
};

// w = min(exp(A/beta), cap) with A = Q(s,a) - (1/m) sum_j Q(s, a_j),
// a_j ~ pi(s).
CrrWeight crr_weight(const CriticState& critic, const GaussianHead& head, const EnvSpec& spec,
                     std::span<const float> obs, std::span<const float> action, double beta,
                     int m, double cap, Rng& rng);

float crr_policy_update(GaussianHead& head, const CriticState& critic,
                        const TransitionBatch& batch, const EnvSpec& spec, double beta,
                        const TrainerConfig& config, double learning_rate, Rng& rng);

// One D4PG step: ascend the critic value of the policy's action; returns the
// objective (mean critic value). Critic parameters are frozen during the
// step.
float d4pg_policy_update(nn::MlpParams& policy_net, nn::AdamState& adam,
                         const CriticState& critic, const TransitionBatch& batch,
                         const EnvSpec& spec, double learning_rate);

// Full training run; deterministic given setting.seed.
PolicyArtifact train(const Dataset& dataset, const HyperparameterSetting& setting,
                     const TrainerConfig& config, const AtomGrid& grid);

// One run snapshotted at several step counts (ascending). Snapshot k is
// bitwise identical to train() with learner_steps = k and the same seed.
std::vector<PolicyArtifact> train_with_snapshots(const Dataset& dataset,
                                                 const HyperparameterSetting& setting,
                                                 const std::vector<std::int64_t>& snapshot_steps,
                                                 const TrainerConfig& config,
                                                 const AtomGrid& grid);

}  // namespace ohs
