#pragma once

#include <functional>
#include <span>
#include <vector>

#include "ohs/nn.hpp"

namespace ohs {

// Deterministic evaluation-time policy: maps an observation to an action.
class Policy {
public:
    virtual ~Policy() = default;
    virtual void act(std::span<const float> obs, std::span<float> action) const = 0;

    std::vector<float> act(std::span<const float> obs, int act_dim) const {
        std::vector<float> a(act_dim);
        act(obs, a);
        return a;
    }
};

// MLP head squashed by tanh and affinely mapped into the action bounds.
// Trained policies of every algorithm evaluate through this: for Gaussian
// heads the evaluation action is the distribution mean, which makes the
// policy deterministic.
class MlpPolicy : public Policy {
public:
    MlpPolicy(nn::MlpParams net, std::vector<float> action_low, std::vector<float> action_high);

    using Policy::act;
    void act(std::span<const float> obs, std::span<float> action) const override;
    // batched evaluation; one row per observation
    nn::MatF act_batch(const nn::MatF& obs) const;

    const nn::MlpParams& net() const { return net_; }

private:
    nn::MlpParams net_;
    std::vector<float> low_, high_;
};

// tanh-squash a batch of pre-activations into [low, high] per column
nn::MatF squash_actions_batch(const nn::MatF& pre, const std::vector<float>& low,
                              const std::vector<float>& high);

// Scripted policy from a callable; used for behavior experts and oracles.
class FnPolicy : public Policy {
public:
    using Fn = std::function<void(std::span<const float>, std::span<float>)>;
    explicit FnPolicy(Fn fn) : fn_(std::move(fn)) {}
    using Policy::act;
    void act(std::span<const float> obs, std::span<float> action) const override {
        fn_(obs, action);
    }

private:
    Fn fn_;
};

// tanh squashing helpers shared by policy heads
inline float squash_to_bounds(float pre, float low, float high) {
    const float t = std::tanh(pre);
    return low + 0.5f * (t + 1.0f) * (high - low);
}

}  // namespace ohs
