#include "ohs/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <set>

#include "ohs/errors.hpp"

namespace ohs {

namespace {

std::atomic<std::uint64_t> g_policy_update_critic_reads{0};

template <typename T>
nn::Mat<T> concat_cols(const nn::Mat<T>& a, const nn::Mat<T>& b) {
    nn::Mat<T> out(a.rows(), a.cols() + b.cols());
    out.leftCols(a.cols()) = a;
    out.rightCols(b.cols()) = b;
    return out;
}

template <typename T>
nn::Vec<T> atoms_vec(const AtomGrid& grid) {
    return grid.atoms().cast<T>();
}

template <typename T>
nn::Vec<T> bounds_vec(const std::vector<float>& b) {
    nn::Vec<T> v(b.size());
    for (std::size_t i = 0; i < b.size(); ++i) v[static_cast<Eigen::Index>(i)] = T(b[i]);
    return v;
}

}  // namespace

std::string to_string(Algorithm a) {
    switch (a) {
        case Algorithm::BC: return "bc";
        case Algorithm::CRR: return "crr";
        case Algorithm::D4PG: return "d4pg";
    }
    return "?";
}

Algorithm algorithm_from_string(const std::string& s) {
    std::string t;
    for (char c : s) t.push_back(static_cast<char>(std::tolower(c)));
    if (t == "bc") return Algorithm::BC;
    if (t == "crr") return Algorithm::CRR;
    if (t == "d4pg") return Algorithm::D4PG;
    throw ConfigError("unknown algorithm '" + s + "'");
}

void HyperparameterSetting::validate() const {
    if (hidden_size < 1 || num_blocks < 0) throw ConfigError("invalid architecture");
    if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
    if (learner_steps < 0) throw ConfigError("learner_steps must be >= 0");
    if ((algorithm == Algorithm::CRR) != beta.has_value())
        throw ConfigError("beta must be present iff algorithm is CRR");
    if (beta && !(*beta > 0)) throw ConfigError("beta must be positive");
}

std::string HyperparameterSetting::policy_id() const {
    char buf[160];
    if (beta) {
        std::snprintf(buf, sizeof(buf), "%s_h%d_b%d_lr%g_beta%g_s%lld", to_string(algorithm).c_str(),
                      hidden_size, num_blocks, learning_rate, *beta,
                      static_cast<long long>(learner_steps));
    } else {
        std::snprintf(buf, sizeof(buf), "%s_h%d_b%d_lr%g_s%lld", to_string(algorithm).c_str(),
                      hidden_size, num_blocks, learning_rate,
                      static_cast<long long>(learner_steps));
    }
    return buf;
}

void TrainerConfig::validate() const {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in (0, 1]");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (target_update_period < 1) throw ConfigError("target_update_period must be >= 1");
    if (crr_advantage_samples < 1) throw ConfigError("crr_advantage_samples must be >= 1");
    if (!(crr_weight_cap > 0)) throw ConfigError("crr_weight_cap must be positive");
}

MlpPolicy PolicyArtifact::make_policy(const EnvSpec& spec) const {
    return MlpPolicy(policy_params, spec.action_low, spec.action_high);
}

AtomGrid default_atom_grid(const Environment& env, double gamma, int n_atoms) {
    auto [lo, hi] = env.value_bounds(gamma);
    const double margin = 0.1 * (hi - lo);
    return AtomGrid{lo - margin, hi + margin, n_atoms};
}

TransitionBatch TransitionBatch::gather(const std::vector<const Transition*>& transitions,
                                        const std::vector<std::size_t>& indices) {
    const auto b = static_cast<Eigen::Index>(indices.size());
    const auto obs_dim = static_cast<Eigen::Index>(transitions[indices[0]]->obs.size());
    const auto act_dim = static_cast<Eigen::Index>(transitions[indices[0]]->action.size());
    TransitionBatch out;
    out.obs.resize(b, obs_dim);
    out.action.resize(b, act_dim);
    out.reward.resize(b);
    out.next_obs.resize(b, obs_dim);
    out.terminal.resize(b);
    for (Eigen::Index i = 0; i < b; ++i) {
        const Transition& t = *transitions[indices[static_cast<std::size_t>(i)]];
        for (Eigen::Index d = 0; d < obs_dim; ++d) {
            out.obs(i, d) = t.obs[static_cast<std::size_t>(d)];
            out.next_obs(i, d) = t.next_obs[static_cast<std::size_t>(d)];
        }
        for (Eigen::Index d = 0; d < act_dim; ++d)
            out.action(i, d) = t.action[static_cast<std::size_t>(d)];
        out.reward[i] = t.reward;
        out.terminal[i] = t.terminal ? 1.0f : 0.0f;
    }
    return out;
}

// --- critic losses ---

template <typename T>
CriticLoss<T> critic_loss_grads(const nn::MlpParamsT<T>& critic,
                                const nn::MlpParamsT<T>& target_critic, const nn::Mat<T>& obs,
                                const nn::Mat<T>& action, const nn::Vec<T>& reward,
                                const nn::Mat<T>& next_obs, const nn::Mat<T>& next_action,
                                const nn::Vec<T>& terminal, const AtomGrid& grid, T gamma) {
    const Eigen::Index b = obs.rows();
    const int n_atoms = grid.n_atoms;

    // bootstrapped targets (constants: no gradient through this path)
    nn::Mat<T> target_logits = nn::mlp_forward(target_critic, concat_cols(next_obs, next_action));
    nn::Mat<T> target_probs(b, n_atoms);
    for (Eigen::Index i = 0; i < b; ++i) {
        nn::Vec<T> row = target_logits.row(i);
        target_probs.row(i) = softmax<T>(row);
    }

    nn::MlpCache<T> cache;
    nn::Mat<T> pred_logits = nn::mlp_forward(critic, concat_cols(obs, action), cache);

    T loss_sum = T(0);
    nn::Mat<T> upstream(b, n_atoms);
    for (Eigen::Index i = 0; i < b; ++i) {
        const double discount = static_cast<double>(gamma) * (1.0 - double(terminal[i]));
        CategoricalDistribution tgt{grid, target_probs.row(i).template cast<double>()};
        CategoricalDistribution projected = project(double(reward[i]), discount, tgt);
        nn::Vec<T> proj = projected.probs.cast<T>();
        nn::Vec<T> logits_row = pred_logits.row(i);
        auto [l, g] = cross_entropy_loss<T>(logits_row, proj);
        loss_sum += l;
        upstream.row(i) = g.transpose() / T(b);
    }

    CriticLoss<T> out;
    out.loss = loss_sum / T(b);
    out.grads = nn::mlp_backward(critic, cache, upstream);
    return out;
}

template <typename T>
CriticLoss<T> critic_loss_grads_scalar(const nn::MlpParamsT<T>& critic,
                                       const nn::MlpParamsT<T>& target_critic,
                                       const nn::Mat<T>& obs, const nn::Mat<T>& action,
                                       const nn::Vec<T>& reward, const nn::Mat<T>& next_obs,
                                       const nn::Mat<T>& next_action, const nn::Vec<T>& terminal,
                                       T gamma) {
    const Eigen::Index b = obs.rows();
    nn::Mat<T> target_q = nn::mlp_forward(target_critic, concat_cols(next_obs, next_action));

    nn::MlpCache<T> cache;
    nn::Mat<T> pred = nn::mlp_forward(critic, concat_cols(obs, action), cache);

    T loss_sum = T(0);
    nn::Mat<T> upstream(b, 1);
    for (Eigen::Index i = 0; i < b; ++i) {
        const T discount = gamma * (T(1) - terminal[i]);
        const T target = reward[i] + discount * target_q(i, 0);
        const T diff = pred(i, 0) - target;
        loss_sum += T(0.5) * diff * diff;
        upstream(i, 0) = diff / T(b);
    }

    CriticLoss<T> out;
    out.loss = loss_sum / T(b);
    out.grads = nn::mlp_backward(critic, cache, upstream);
    return out;
}

// --- policy losses ---

template <typename T>
nn::Mat<T> squash_preimage(const nn::Mat<T>& action, const nn::Vec<T>& low,
                           const nn::Vec<T>& high) {
    const T lim = T(1) - T(1e-6);
    nn::Mat<T> u(action.rows(), action.cols());
    for (Eigen::Index c = 0; c < action.cols(); ++c) {
        for (Eigen::Index r = 0; r < action.rows(); ++r) {
            T y = T(2) * (action(r, c) - low[c]) / (high[c] - low[c]) - T(1);
            y = std::clamp(y, -lim, lim);
            u(r, c) = std::atanh(y);
        }
    }
    return u;
}

template <typename T>
PolicyLoss<T> gaussian_nll_loss_grads(const nn::MlpParamsT<T>& mean_net,
                                      const std::vector<T>& log_std, const nn::Mat<T>& obs,
                                      const nn::Mat<T>& u_target, const nn::Vec<T>& weights) {
    const Eigen::Index b = obs.rows();
    const Eigen::Index d = u_target.cols();

    nn::MlpCache<T> cache;
    nn::Mat<T> mu = nn::mlp_forward(mean_net, obs, cache);

    nn::Vec<T> inv_var(d), ls(d);
    for (Eigen::Index j = 0; j < d; ++j) {
        ls[j] = log_std[static_cast<std::size_t>(j)];
        inv_var[j] = std::exp(T(-2) * ls[j]);
    }

    T loss = T(0);
    nn::Mat<T> upstream(b, d);
    std::vector<T> ls_grads(static_cast<std::size_t>(d), T(0));
    for (Eigen::Index i = 0; i < b; ++i) {
        const T w = weights[i];
        for (Eigen::Index j = 0; j < d; ++j) {
            const T diff = mu(i, j) - u_target(i, j);
            const T sq = diff * diff * inv_var[j];
            loss += w * (T(0.5) * sq + ls[j]);
            upstream(i, j) = w * diff * inv_var[j] / T(b);
            ls_grads[static_cast<std::size_t>(j)] += w * (T(1) - sq) / T(b);
        }
    }

    PolicyLoss<T> out;
    out.loss = loss / T(b);
    out.net_grads = nn::mlp_backward(mean_net, cache, upstream);
    out.log_std_grads = std::move(ls_grads);
    return out;
}

template <typename T>
PolicyLoss<T> d4pg_loss_grads(const nn::MlpParamsT<T>& policy_net,
                              const nn::MlpParamsT<T>& critic, const nn::Mat<T>& obs,
                              const AtomGrid& grid, const nn::Vec<T>& low,
                              const nn::Vec<T>& high) {
    const Eigen::Index b = obs.rows();
    const int n_atoms = grid.n_atoms;
    const nn::Vec<T> atoms = atoms_vec<T>(grid);

    nn::MlpCache<T> policy_cache;
    nn::Mat<T> pre = nn::mlp_forward(policy_net, obs, policy_cache);
    nn::Mat<T> tanh_pre = pre.array().tanh();
    nn::Mat<T> action(b, pre.cols());
    for (Eigen::Index c = 0; c < pre.cols(); ++c)
        action.col(c) = low[c] + T(0.5) * (tanh_pre.col(c).array() + T(1)) * (high[c] - low[c]);

    nn::MlpCache<T> critic_cache;
    nn::Mat<T> logits = nn::mlp_forward(critic, concat_cols(obs, action), critic_cache);
    g_policy_update_critic_reads.fetch_add(1, std::memory_order_relaxed);

    // dJ/dlogits_k = p_k (z_k - mean) for each row
    T objective = T(0);
    nn::Mat<T> dlogits(b, n_atoms);
    for (Eigen::Index i = 0; i < b; ++i) {
        nn::Vec<T> row = logits.row(i);
        nn::Vec<T> p = softmax<T>(row);
        const T mean = p.dot(atoms);
        objective += mean;
        dlogits.row(i) = (p.array() * (atoms.array() - mean)).transpose() / T(b);
    }
    objective /= T(b);

    // gradient w.r.t. the critic's action input
    nn::Mat<T> critic_input_grad;
    nn::mlp_backward(critic, critic_cache, dlogits, &critic_input_grad);
    nn::Mat<T> daction = critic_input_grad.rightCols(action.cols());

    // chain through the squashing head; ascend J, so minimize -J
    nn::Mat<T> dpre(b, pre.cols());
    for (Eigen::Index c = 0; c < pre.cols(); ++c) {
        dpre.col(c) = -daction.col(c).array() * T(0.5) * (high[c] - low[c]) *
                      (T(1) - tanh_pre.col(c).array().square());
    }

    PolicyLoss<T> out;
    out.loss = -objective;
    out.net_grads = nn::mlp_backward(policy_net, policy_cache, dpre);
    return out;
}

// --- stateful updates ---

CriticState CriticState::init(int obs_dim, int act_dim, int hidden_size, int num_blocks,
                              const AtomGrid& grid, bool distributional, double learning_rate,
                              Rng& rng) {
    CriticState st;
    st.grid = grid;
    st.distributional = distributional;
    st.learning_rate = learning_rate;
    nn::MlpShape shape{obs_dim + act_dim, distributional ? grid.n_atoms : 1, hidden_size,
                       num_blocks};
    st.params = nn::init_mlp<float>(shape, rng);
    st.target = st.params;
    st.adam = nn::AdamState(st.params.data.size());
    return st;
}

float critic_update(CriticState& critic, const TransitionBatch& batch,
                    const nn::MatF& next_actions, double gamma) {
    CriticLoss<float> res =
        critic.distributional
            ? critic_loss_grads<float>(critic.params, critic.target, batch.obs, batch.action,
                                       batch.reward, batch.next_obs, next_actions, batch.terminal,
                                       critic.grid, static_cast<float>(gamma))
            : critic_loss_grads_scalar<float>(critic.params, critic.target, batch.obs,
                                              batch.action, batch.reward, batch.next_obs,
                                              next_actions, batch.terminal,
                                              static_cast<float>(gamma));
    if (!std::isfinite(res.loss)) throw TrainingError("critic_update: non-finite loss");
    nn::adam_step(critic.adam, critic.params.data, res.grads.data,
                  static_cast<float>(critic.learning_rate));
    return res.loss;
}

float critic_update(CriticState& critic, const TransitionBatch& batch, const Policy& policy,
                    double gamma) {
    if (const auto* mlp = dynamic_cast<const MlpPolicy*>(&policy))
        return critic_update(critic, batch, mlp->act_batch(batch.next_obs), gamma);

    const Eigen::Index b = batch.size();
    const Eigen::Index act_dim = batch.action.cols();
    nn::MatF next_actions(b, act_dim);
    std::vector<float> obs_row(static_cast<std::size_t>(batch.next_obs.cols()));
    std::vector<float> act_row(static_cast<std::size_t>(act_dim));
    for (Eigen::Index i = 0; i < b; ++i) {
        for (Eigen::Index d = 0; d < batch.next_obs.cols(); ++d)
            obs_row[static_cast<std::size_t>(d)] = batch.next_obs(i, d);
        policy.act(obs_row, act_row);
        for (Eigen::Index d = 0; d < act_dim; ++d)
            next_actions(i, d) = act_row[static_cast<std::size_t>(d)];
    }
    return critic_update(critic, batch, next_actions, gamma);
}

void sync_target(CriticState& critic) { critic.target = critic.params; }

std::uint64_t policy_update_critic_reads() {
    return g_policy_update_critic_reads.load(std::memory_order_relaxed);
}

namespace {

// batched mean action of a Gaussian head (the evaluation action)
nn::MatF head_mean_actions(const GaussianHead& head, const nn::MatF& obs, const EnvSpec& spec) {
    return squash_actions_batch(nn::mlp_forward(head.mean_net, obs), spec.action_low,
                                spec.action_high);
}

void clamp_log_std(std::vector<float>& log_std) {
    for (float& v : log_std) v = std::clamp(v, kLogStdMin, kLogStdMax);
}

float critic_q_value(const CriticState& critic, std::span<const float> obs,
                     std::span<const float> action) {
    nn::VecF x(obs.size() + action.size());
    for (std::size_t i = 0; i < obs.size(); ++i) x[static_cast<Eigen::Index>(i)] = obs[i];
    for (std::size_t i = 0; i < action.size(); ++i)
        x[static_cast<Eigen::Index>(obs.size() + i)] = action[i];
    nn::VecF out = nn::mlp_forward_vec(critic.params, x);
    g_policy_update_critic_reads.fetch_add(1, std::memory_order_relaxed);
    if (!critic.distributional) return out[0];
    nn::VecF p = softmax<float>(out);
    return static_cast<float>(p.cast<double>().dot(critic.grid.atoms()));
}

}  // namespace

float bc_policy_update(GaussianHead& head, const TransitionBatch& batch, const EnvSpec& spec,
                       double learning_rate) {
    const nn::VecF low = bounds_vec<float>(spec.action_low);
    const nn::VecF high = bounds_vec<float>(spec.action_high);
    nn::MatF u_target = squash_preimage<float>(batch.action, low, high);
    nn::VecF weights = nn::VecF::Ones(batch.size());
    auto res = gaussian_nll_loss_grads<float>(head.mean_net, head.log_std, batch.obs, u_target,
                                              weights);
    if (!std::isfinite(res.loss)) throw TrainingError("bc_policy_update: non-finite loss");
    nn::adam_step(head.net_adam, head.mean_net.data, res.net_grads.data,
                  static_cast<float>(learning_rate));
    nn::adam_step(head.log_std_adam, head.log_std, res.log_std_grads,
                  static_cast<float>(learning_rate));
    clamp_log_std(head.log_std);
    return res.loss;
}

CrrWeight crr_weight(const CriticState& critic, const GaussianHead& head, const EnvSpec& spec,
                     std::span<const float> obs, std::span<const float> action, double beta,
                     int m, double cap, Rng& rng) {
    const double q_sa = critic_q_value(critic, obs, action);

    nn::VecF x(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) x[static_cast<Eigen::Index>(i)] = obs[i];
    nn::VecF mu = nn::mlp_forward_vec(head.mean_net, x);

    CrrWeight out;
    double q_pi = 0.0;
    for (int j = 0; j < m; ++j) {
        std::vector<float> a(static_cast<std::size_t>(spec.act_dim));
        for (int d = 0; d < spec.act_dim; ++d) {
            const float sigma = std::exp(head.log_std[static_cast<std::size_t>(d)]);
            const float u = mu[d] + sigma * static_cast<float>(rng.normal());
            a[static_cast<std::size_t>(d)] =
                squash_to_bounds(u, spec.action_low[static_cast<std::size_t>(d)],
                                 spec.action_high[static_cast<std::size_t>(d)]);
        }
        q_pi += critic_q_value(critic, obs, a);
        out.sampled_actions.push_back(std::move(a));
    }
    q_pi /= m;

    out.advantage = q_sa - q_pi;
    out.weight = std::min(std::exp(out.advantage / beta), cap);
    return out;
}

float crr_policy_update(GaussianHead& head, const CriticState& critic,
                        const TransitionBatch& batch, const EnvSpec& spec, double beta,
                        const TrainerConfig& config, double learning_rate, Rng& rng) {
    const Eigen::Index b = batch.size();
    nn::VecF weights(b);
    std::vector<float> obs_row(static_cast<std::size_t>(batch.obs.cols()));
    std::vector<float> act_row(static_cast<std::size_t>(batch.action.cols()));
    for (Eigen::Index i = 0; i < b; ++i) {
        for (Eigen::Index d = 0; d < batch.obs.cols(); ++d)
            obs_row[static_cast<std::size_t>(d)] = batch.obs(i, d);
        for (Eigen::Index d = 0; d < batch.action.cols(); ++d)
            act_row[static_cast<std::size_t>(d)] = batch.action(i, d);
        weights[i] = static_cast<float>(crr_weight(critic, head, spec, obs_row, act_row, beta,
                                                   config.crr_advantage_samples,
                                                   config.crr_weight_cap, rng)
                                            .weight);
    }

    const nn::VecF low = bounds_vec<float>(spec.action_low);
    const nn::VecF high = bounds_vec<float>(spec.action_high);
    nn::MatF u_target = squash_preimage<float>(batch.action, low, high);
    auto res = gaussian_nll_loss_grads<float>(head.mean_net, head.log_std, batch.obs, u_target,
                                              weights);
    if (!std::isfinite(res.loss)) throw TrainingError("crr_policy_update: non-finite loss");
    nn::adam_step(head.net_adam, head.mean_net.data, res.net_grads.data,
                  static_cast<float>(learning_rate));
    nn::adam_step(head.log_std_adam, head.log_std, res.log_std_grads,
                  static_cast<float>(learning_rate));
    clamp_log_std(head.log_std);
    return res.loss;
}

float d4pg_policy_update(nn::MlpParams& policy_net, nn::AdamState& adam,
                         const CriticState& critic, const TransitionBatch& batch,
                         const EnvSpec& spec, double learning_rate) {
    auto res = d4pg_loss_grads<float>(policy_net, critic.params, batch.obs, critic.grid,
                                      bounds_vec<float>(spec.action_low),
                                      bounds_vec<float>(spec.action_high));
    if (!std::isfinite(res.loss)) throw TrainingError("d4pg_policy_update: non-finite loss");
    nn::adam_step(adam, policy_net.data, res.net_grads.data, static_cast<float>(learning_rate));
    return -res.loss;  // the objective
}

// --- training loop ---

PolicyArtifact train(const Dataset& dataset, const HyperparameterSetting& setting,
                     const TrainerConfig& config, const AtomGrid& grid) {
    auto artifacts = train_with_snapshots(dataset, setting, {setting.learner_steps}, config, grid);
    return std::move(artifacts.front());
}

std::vector<PolicyArtifact> train_with_snapshots(const Dataset& dataset,
                                                 const HyperparameterSetting& setting,
                                                 const std::vector<std::int64_t>& snapshot_steps,
                                                 const TrainerConfig& config,
                                                 const AtomGrid& grid) {
    setting.validate();
    config.validate();
    grid.validate();
    if (snapshot_steps.empty()) throw ConfigError("train: no snapshot steps");
    if (!std::is_sorted(snapshot_steps.begin(), snapshot_steps.end()))
        throw ConfigError("train: snapshot steps must be ascending");

    const EnvSpec& spec = dataset.env_spec;
    Rng rng(setting.seed);

    GaussianHead head;
    head.mean_net = nn::init_mlp<float>(
        nn::MlpShape{spec.obs_dim, spec.act_dim, setting.hidden_size, setting.num_blocks}, rng);
    head.log_std.assign(static_cast<std::size_t>(spec.act_dim), -0.5f);
    head.net_adam = nn::AdamState(head.mean_net.data.size());
    head.log_std_adam = nn::AdamState(head.log_std.size());

    CriticState critic = CriticState::init(spec.obs_dim, spec.act_dim, setting.hidden_size,
                                           setting.num_blocks, grid, /*distributional=*/true,
                                           setting.learning_rate, rng);

    const auto transitions = dataset.all_transitions();
    if (transitions.empty()) throw std::invalid_argument("train: empty dataset");

    auto snapshot = [&](std::int64_t steps, bool failed) {
        PolicyArtifact a;
        a.setting = setting;
        a.setting.learner_steps = steps;
        a.policy_params = head.mean_net;
        a.policy_log_std = head.log_std;
        a.orl_critic_params = critic.params;
        a.grid = grid;
        a.failed = failed || !a.policy_params.all_finite() || !a.orl_critic_params.all_finite();
        a.policy_id = a.setting.policy_id();
        return a;
    };

    std::vector<PolicyArtifact> out;
    std::set<std::int64_t> remaining(snapshot_steps.begin(), snapshot_steps.end());
    std::vector<float> critic_losses, policy_losses;

    auto take_due_snapshots = [&](std::int64_t completed, bool failed) {
        while (!remaining.empty() && (*remaining.begin() <= completed || failed)) {
            auto it = remaining.begin();
            PolicyArtifact a = snapshot(*it, failed);
            a.critic_losses = critic_losses;
            a.policy_losses = policy_losses;
            out.push_back(std::move(a));
            remaining.erase(it);
        }
    };

    const std::int64_t max_steps = snapshot_steps.back();
    std::vector<std::size_t> indices(static_cast<std::size_t>(config.batch_size));
    take_due_snapshots(0, false);

    for (std::int64_t step = 0; step < max_steps; ++step) {
        for (auto& idx : indices) idx = rng.below(transitions.size());
        TransitionBatch batch = TransitionBatch::gather(transitions, indices);

        try {
            nn::MatF next_actions = head_mean_actions(head, batch.next_obs, spec);
            critic_losses.push_back(critic_update(critic, batch, next_actions, config.gamma));
            if (step % config.target_update_period == 0) sync_target(critic);

            switch (setting.algorithm) {
                case Algorithm::BC:
                    policy_losses.push_back(
                        bc_policy_update(head, batch, spec, setting.learning_rate));
                    break;
                case Algorithm::CRR:
                    policy_losses.push_back(crr_policy_update(head, critic, batch, spec,
                                                              *setting.beta, config,
                                                              setting.learning_rate, rng));
                    break;
                case Algorithm::D4PG:
                    policy_losses.push_back(d4pg_policy_update(head.mean_net, head.net_adam,
                                                               critic, batch, spec,
                                                               setting.learning_rate));
                    break;
            }
        } catch (const TrainingError&) {
            take_due_snapshots(max_steps, true);
            return out;
        }
        take_due_snapshots(step + 1, false);
    }
    return out;
}

#define OHS_TRAIN_INSTANTIATE(T)                                                               \
    template CriticLoss<T> critic_loss_grads<T>(                                               \
        const nn::MlpParamsT<T>&, const nn::MlpParamsT<T>&, const nn::Mat<T>&,                 \
        const nn::Mat<T>&, const nn::Vec<T>&, const nn::Mat<T>&, const nn::Mat<T>&,            \
        const nn::Vec<T>&, const AtomGrid&, T);                                                \
    template CriticLoss<T> critic_loss_grads_scalar<T>(                                        \
        const nn::MlpParamsT<T>&, const nn::MlpParamsT<T>&, const nn::Mat<T>&,                 \
        const nn::Mat<T>&, const nn::Vec<T>&, const nn::Mat<T>&, const nn::Mat<T>&,            \
        const nn::Vec<T>&, T);                                                                 \
    template nn::Mat<T> squash_preimage<T>(const nn::Mat<T>&, const nn::Vec<T>&,               \
                                           const nn::Vec<T>&);                                 \
    template PolicyLoss<T> gaussian_nll_loss_grads<T>(const nn::MlpParamsT<T>&,                \
                                                      const std::vector<T>&, const nn::Mat<T>&, \
                                                      const nn::Mat<T>&, const nn::Vec<T>&);   \
    template PolicyLoss<T> d4pg_loss_grads<T>(const nn::MlpParamsT<T>&, const nn::MlpParamsT<T>&, \
                                              const nn::Mat<T>&, const AtomGrid&,              \
                                              const nn::Vec<T>&, const nn::Vec<T>&);

OHS_TRAIN_INSTANTIATE(float)
OHS_TRAIN_INSTANTIATE(double)

#undef OHS_TRAIN_INSTANTIATE

}  // namespace ohs
