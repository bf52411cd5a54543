#include "ohs/policy.hpp"

#include <stdexcept>

namespace ohs {

MlpPolicy::MlpPolicy(nn::MlpParams net, std::vector<float> action_low,
                     std::vector<float> action_high)
    : net_(std::move(net)), low_(std::move(action_low)), high_(std::move(action_high)) {
    if (static_cast<int>(low_.size()) != net_.shape.output_dim ||
        static_cast<int>(high_.size()) != net_.shape.output_dim)
        throw std::invalid_argument("MlpPolicy: bounds size must match output_dim");
}

void MlpPolicy::act(std::span<const float> obs, std::span<float> action) const {
    if (static_cast<int>(obs.size()) != net_.shape.input_dim)
        throw std::invalid_argument("MlpPolicy: observation dimension mismatch");
    if (static_cast<int>(action.size()) != net_.shape.output_dim)
        throw std::invalid_argument("MlpPolicy: action dimension mismatch");
    nn::MatF x(1, obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) x(0, static_cast<Eigen::Index>(i)) = obs[i];
    nn::MatF a = squash_actions_batch(nn::mlp_forward(net_, x), low_, high_);
    for (std::size_t i = 0; i < action.size(); ++i)
        action[i] = a(0, static_cast<Eigen::Index>(i));
}

nn::MatF MlpPolicy::act_batch(const nn::MatF& obs) const {
    return squash_actions_batch(nn::mlp_forward(net_, obs), low_, high_);
}

nn::MatF squash_actions_batch(const nn::MatF& pre, const std::vector<float>& low,
                              const std::vector<float>& high) {
    nn::MatF t = pre.array().tanh();
    nn::MatF out(t.rows(), t.cols());
    for (Eigen::Index c = 0; c < t.cols(); ++c) {
        const auto i = static_cast<std::size_t>(c);
        out.col(c) = low[i] + 0.5f * (t.col(c).array() + 1.0f) * (high[i] - low[i]);
    }
    return out;
}

}  // namespace ohs
