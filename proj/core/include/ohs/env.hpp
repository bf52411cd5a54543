#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ohs/policy.hpp"

namespace ohs {

struct EnvSpec {
    std::string name;
    int obs_dim = 0;
    int act_dim = 0;
    int horizon = 0;  // max steps per episode
    std::vector<float> action_low;
    std::vector<float> action_high;

    void validate() const;
};

// One logged (s, a, r, s', terminal) tuple.
struct Transition {
    std::vector<float> obs;
    std::vector<float> action;
    float reward = 0.0f;
    std::vector<float> next_obs;
    bool terminal = false;
    std::int32_t episode_id = 0;
    std::int32_t step = 0;
};

using Episode = std::vector<Transition>;

struct Dataset {
    EnvSpec env_spec;
    std::vector<Episode> episodes;
    std::string behavior_meta;

    std::size_t n_transitions() const;
    // observations of each episode's first transition
    std::vector<const Transition*> initial_transitions() const;
    std::vector<const Transition*> all_transitions() const;
    std::vector<double> episode_returns(double gamma) const;
    void validate() const;
};

// Finite-state view used by the dynamic-programming oracle.
class TabularEnv {
public:
    virtual ~TabularEnv() = default;
    virtual int num_states() const = 0;
    virtual int action_dim() const = 0;
    virtual std::vector<float> state_obs(int state) const = 0;
    struct TabularStep {
        int next_state;
        double reward;
        bool terminal;
    };
    virtual TabularStep transition(int state, std::span<const float> action) const = 0;
};

// Single-threaded state machine; reset(seed) starts an episode.
class Environment {
public:
    virtual ~Environment() = default;
    virtual const EnvSpec& spec() const = 0;
    virtual std::vector<float> reset(std::uint64_t seed) = 0;

    struct StepResult {
        std::vector<float> next_obs;
        float reward = 0.0f;
        bool terminal = false;
        bool clipped = false;  // set when the action had to be clipped into bounds
    };
    virtual StepResult step(std::span<const float> action) = 0;

    // [lo, hi] achievable discounted return; used to size critic atom grids
    virtual std::pair<double, double> value_bounds(double gamma) const = 0;

    virtual const TabularEnv* tabular() const { return nullptr; }
};

// Registered environments: "chainwalk", "pointmass", "swingup".
std::unique_ptr<Environment> make_env(const std::string& name);
// The scripted expert for an environment.
std::unique_ptr<Policy> make_expert(const std::string& env_name);

// 5-state chain observed one-hot; scalar action, right iff a > 0. Stepping in
// the rightmost state yields reward 1 and ends the episode. The tabular
// oracle target.
class ChainWalk final : public Environment, public TabularEnv {
public:
    static constexpr int kNumStates = 5;
    static constexpr int kHorizon = 20;

    ChainWalk();
    const EnvSpec& spec() const override { return spec_; }
    std::vector<float> reset(std::uint64_t seed) override;
    StepResult step(std::span<const float> action) override;
    std::pair<double, double> value_bounds(double /*gamma*/) const override {
        return {0.0, 1.0};
    }
    const TabularEnv* tabular() const override { return this; }

    int num_states() const override { return kNumStates; }
    int action_dim() const override { return 1; }
    std::vector<float> state_obs(int state) const override;
    TabularStep transition(int state, std::span<const float> action) const override;

private:
    EnvSpec spec_;
    int pos_ = 0;
    int steps_ = 0;
};

// Damped point mass on a bounded plane; 2-d force action, reward is the
// negative distance to the goal at the origin.
class PointMassReach final : public Environment {
public:
    static constexpr int kHorizon = 100;
    static constexpr float kDt = 0.1f;
    static constexpr float kDamping = 0.9f;
    static constexpr float kPosLimit = 1.5f;

    PointMassReach();
    const EnvSpec& spec() const override { return spec_; }
    std::vector<float> reset(std::uint64_t seed) override;
    StepResult step(std::span<const float> action) override;
    std::pair<double, double> value_bounds(double gamma) const override;

private:
    EnvSpec spec_;
    float px_ = 0, py_ = 0, vx_ = 0, vy_ = 0;
    int steps_ = 0;
};

// Torque-limited pendulum swingup; obs (cos th, sin th, thdot), reward
// cos th with th = 0 upright. Frictionless semi-implicit Euler integration.
//
// reset(seed) draws from Rng(seed): first th = pi + U(-0.1, 0.1), then
// thdot = U(-0.05, 0.05).
class SwingupLite final : public Environment {
public:
    static constexpr int kHorizon = 200;
    static constexpr double kDt = 0.05;
    static constexpr double kGravity = 15.0;      // 3 g / (2 l)
    static constexpr double kTorqueCoef = 3.0;    // 3 / (m l^2)
    static constexpr double kTorqueScale = 2.0;   // action in [-1,1] -> torque
    static constexpr double kMaxSpeed = 8.0;

    SwingupLite();
    const EnvSpec& spec() const override { return spec_; }
    std::vector<float> reset(std::uint64_t seed) override;
    StepResult step(std::span<const float> action) override;
    std::pair<double, double> value_bounds(double gamma) const override;

    // mechanical energy in the units of the dynamics above; constant under
    // zero torque, changes by kTorqueCoef * torque * thdot * dt per step
    static double energy(double theta, double theta_dot) {
        return 0.5 * theta_dot * theta_dot + kGravity * std::cos(theta);
    }
    double theta() const { return theta_; }
    double theta_dot() const { return theta_dot_; }

private:
    EnvSpec spec_;
    double theta_ = 0, theta_dot_ = 0;
    int steps_ = 0;
};

struct ActualValue {
    double mean = 0.0;
    double stderr_ = 0.0;
    int n_episodes = 0;
};

// Ground-truth value: mean and standard error of the discounted return over
// n_episodes rollouts from seeded initial states.
ActualValue actual_value(Environment& env, const Policy& policy, int n_episodes, double gamma,
                         std::uint64_t seed);

// Iterative policy evaluation to a fixed point (sup-norm residual < tol).
// Infinite-horizon oracle over the tabular dynamics. When given, `residuals`
// receives the sup-norm residual of every sweep.
std::vector<double> dp_policy_evaluation(const TabularEnv& env, const Policy& policy,
                                         double gamma, double tol, int max_sweeps = 1000000,
                                         std::vector<double>* residuals = nullptr);
// Throws UnsupportedError when the environment has no tabular view.
std::vector<double> dp_policy_evaluation(const Environment& env, const Policy& policy,
                                         double gamma, double tol, int max_sweeps = 1000000,
                                         std::vector<double>* residuals = nullptr);

// Scripted behavior: per-episode epsilon from a schedule (contiguous chunks
// over the episode range); per step, with probability epsilon the action is
// uniform in bounds, otherwise the expert's.
struct BehaviorSpec {
    std::vector<double> epsilon_schedule{0.0, 0.3, 0.7};
};

Dataset generate_dataset(Environment& env, const Policy& expert, const BehaviorSpec& behavior,
                         int n_episodes, std::uint64_t seed);
// Uses the registered expert for the environment.
Dataset generate_dataset(Environment& env, const BehaviorSpec& behavior, int n_episodes,
                         std::uint64_t seed);

}  // namespace ohs
