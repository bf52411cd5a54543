#include "ohs/stats.hpp"

#include <algorithm>
#include <cmath>

#include "ohs/errors.hpp"

namespace ohs {

namespace {

nn::MatF to_matrix(const std::vector<const Transition*>& transitions,
                   const std::vector<float> Transition::* field) {
    const auto n = static_cast<Eigen::Index>(transitions.size());
    const auto dim = static_cast<Eigen::Index>((transitions[0]->*field).size());
    nn::MatF out(n, dim);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& v = transitions[static_cast<std::size_t>(i)]->*field;
        for (Eigen::Index d = 0; d < dim; ++d) out(i, d) = v[static_cast<std::size_t>(d)];
    }
    return out;
}

}  // namespace

double ValueCritic::q(std::span<const float> obs, std::span<const float> action) const {
    nn::MatF x(1, obs.size() + action.size());
    for (std::size_t i = 0; i < obs.size(); ++i) x(0, static_cast<Eigen::Index>(i)) = obs[i];
    for (std::size_t i = 0; i < action.size(); ++i)
        x(0, static_cast<Eigen::Index>(obs.size() + i)) = action[i];
    nn::MatF out = nn::mlp_forward(params, x);
    if (!grid) return out(0, 0);
    nn::VecF row = out.row(0);
    nn::VecF p = softmax<float>(row);
    return p.cast<double>().dot(grid->atoms());
}

Eigen::VectorXd ValueCritic::q_batch(const nn::MatF& obs, const nn::MatF& action) const {
    nn::MatF x(obs.rows(), obs.cols() + action.cols());
    x.leftCols(obs.cols()) = obs;
    x.rightCols(action.cols()) = action;
    nn::MatF out = nn::mlp_forward(params, x);
    Eigen::VectorXd q(out.rows());
    if (!grid) {
        for (Eigen::Index i = 0; i < out.rows(); ++i) q[i] = out(i, 0);
        return q;
    }
    const Eigen::VectorXd atoms = grid->atoms();
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        nn::VecF row = out.row(i);
        q[i] = softmax<float>(row).cast<double>().dot(atoms);
    }
    return q;
}

namespace {

nn::MatF actions_for(const Policy& policy, const nn::MatF& obs, int act_dim) {
    if (const auto* mlp = dynamic_cast<const MlpPolicy*>(&policy)) return mlp->act_batch(obs);
    nn::MatF out(obs.rows(), act_dim);
    std::vector<float> obs_row(static_cast<std::size_t>(obs.cols()));
    std::vector<float> act_row(static_cast<std::size_t>(act_dim));
    for (Eigen::Index i = 0; i < obs.rows(); ++i) {
        for (Eigen::Index d = 0; d < obs.cols(); ++d)
            obs_row[static_cast<std::size_t>(d)] = obs(i, d);
        policy.act(obs_row, act_row);
        for (int d = 0; d < act_dim; ++d) out(i, d) = act_row[static_cast<std::size_t>(d)];
    }
    return out;
}

}  // namespace

double v_s0(const ValueCritic& critic, const Policy& policy, const Dataset& dataset) {
    auto initial = dataset.initial_transitions();
    if (initial.empty()) throw std::invalid_argument("v_s0: empty dataset");
    nn::MatF obs = to_matrix(initial, &Transition::obs);
    nn::MatF actions = actions_for(policy, obs, dataset.env_spec.act_dim);
    return critic.q_batch(obs, actions).mean();
}

double avg_q(const ValueCritic& critic, const Policy& policy, const Dataset& dataset) {
    auto all = dataset.all_transitions();
    if (all.empty()) throw std::invalid_argument("avg_q: empty dataset");
    nn::MatF obs = to_matrix(all, &Transition::obs);
    nn::MatF actions = actions_for(policy, obs, dataset.env_spec.act_dim);
    return critic.q_batch(obs, actions).mean();
}

double td_err(const ValueCritic& critic, const Policy& policy, const Dataset& dataset,
              double gamma) {
    auto all = dataset.all_transitions();
    if (all.empty()) throw std::invalid_argument("td_err: empty dataset");
    nn::MatF obs = to_matrix(all, &Transition::obs);
    nn::MatF action = to_matrix(all, &Transition::action);
    nn::MatF next_obs = to_matrix(all, &Transition::next_obs);
    nn::MatF next_action = actions_for(policy, next_obs, dataset.env_spec.act_dim);

    Eigen::VectorXd q_sa = critic.q_batch(obs, action);
    Eigen::VectorXd q_next = critic.q_batch(next_obs, next_action);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < q_sa.size(); ++i) {
        const Transition& t = *all[static_cast<std::size_t>(i)];
        const double discount = t.terminal ? 0.0 : gamma;
        sum += t.reward + discount * q_next[i] - q_sa[i];
    }
    return sum / static_cast<double>(q_sa.size());
}

double soft_opc(const ValueCritic& critic, const Dataset& dataset, double gamma,
                double threshold) {
    auto all = dataset.all_transitions();
    if (all.empty()) throw std::invalid_argument("soft_opc: empty dataset");
    const std::vector<double> returns = dataset.episode_returns(gamma);

    nn::MatF obs = to_matrix(all, &Transition::obs);
    nn::MatF action = to_matrix(all, &Transition::action);
    Eigen::VectorXd q = critic.q_batch(obs, action);

    double sum_all = 0.0, sum_success = 0.0;
    std::size_t n_success = 0;
    std::size_t idx = 0;
    for (std::size_t e = 0; e < dataset.episodes.size(); ++e) {
        const bool success = returns[e] > threshold;
        for (std::size_t i = 0; i < dataset.episodes[e].size(); ++i, ++idx) {
            sum_all += q[static_cast<Eigen::Index>(idx)];
            if (success) {
                sum_success += q[static_cast<Eigen::Index>(idx)];
                ++n_success;
            }
        }
    }
    if (n_success == 0)
        throw UndefinedStatistic("soft_opc: no successful trajectory at threshold " +
                                 std::to_string(threshold));
    return sum_success / static_cast<double>(n_success) -
           sum_all / static_cast<double>(all.size());
}

std::vector<double> default_soft_opc_thresholds(const Dataset& dataset, double gamma) {
    std::vector<double> returns = dataset.episode_returns(gamma);
    std::sort(returns.begin(), returns.end());
    std::vector<double> out;
    const auto n = returns.size();
    for (int decile = 1; decile <= 9; ++decile) {
        const auto i = static_cast<std::size_t>(
            std::floor(0.1 * decile * static_cast<double>(n - 1)));
        out.push_back(returns[i]);
    }
    return out;
}

}  // namespace ohs
