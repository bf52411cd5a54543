#include "ohs/train.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "ohs/errors.hpp"
#include "ohs/rng.hpp"
#include "ohs/stats.hpp"

using namespace ohs;

namespace {

double rel_err(double a, double b) {
    const double denom = std::max({std::abs(a), std::abs(b), 1e-8});
    return std::abs(a - b) / denom;
}

struct RandomBatch {
    nn::Mat<double> obs, action, next_obs, next_action;
    nn::Vec<double> reward, terminal;
};

RandomBatch random_batch(int b, int obs_dim, int act_dim, Rng& rng, double p_terminal = 0.25) {
    RandomBatch out;
    out.obs.resize(b, obs_dim);
    out.action.resize(b, act_dim);
    out.next_obs.resize(b, obs_dim);
    out.next_action.resize(b, act_dim);
    out.reward.resize(b);
    out.terminal.resize(b);
    for (int i = 0; i < b; ++i) {
        for (int d = 0; d < obs_dim; ++d) {
            out.obs(i, d) = rng.uniform(-1, 1);
            out.next_obs(i, d) = rng.uniform(-1, 1);
        }
        for (int d = 0; d < act_dim; ++d) {
            out.action(i, d) = rng.uniform(-0.95, 0.95);
            out.next_action(i, d) = rng.uniform(-0.95, 0.95);
        }
        out.reward[i] = rng.uniform(-1, 1);
        out.terminal[i] = rng.uniform01() < p_terminal ? 1.0 : 0.0;
    }
    return out;
}

Dataset chainwalk_dataset(int episodes, uint64_t seed,
                          std::vector<double> schedule = {0.0, 0.3, 0.7}) {
    ChainWalk env;
    BehaviorSpec spec{std::move(schedule)};
    return generate_dataset(env, spec, episodes, seed);
}

const AtomGrid kChainGrid{-0.1, 1.1, 51};

}  // namespace

TEST(HyperparameterSetting, ValidationAndPolicyId) {
    HyperparameterSetting s;
    s.algorithm = Algorithm::CRR;
    s.beta = 0.1;
    s.hidden_size = 64;
    s.num_blocks = 1;
    s.learning_rate = 1e-3;
    s.learner_steps = 2000;
    s.validate();
    EXPECT_EQ(s.policy_id(), "crr_h64_b1_lr0.001_beta0.1_s2000");

    s.beta.reset();
    EXPECT_THROW(s.validate(), ConfigError);

    HyperparameterSetting bc;
    bc.algorithm = Algorithm::BC;
    bc.beta = 1.0;
    EXPECT_THROW(bc.validate(), ConfigError);
    bc.beta.reset();
    bc.learning_rate = 1e-5;
    bc.learner_steps = 50000;
    EXPECT_EQ(bc.policy_id(), "bc_h64_b1_lr1e-05_s50000");
}

TEST(CriticLoss, GradientMatchesFiniteDifferences) {
    Rng rng(404);
    const AtomGrid grid{-2.0, 2.0, 21};
    for (nn::MlpShape shape : {nn::MlpShape{6, 21, 10, 1}, nn::MlpShape{6, 21, 8, 2}}) {
        auto critic = nn::init_mlp<double>(shape, rng);
        auto target = nn::init_mlp<double>(shape, rng);
        auto batch = random_batch(5, 4, 2, rng);

        auto res = critic_loss_grads<double>(critic, target, batch.obs, batch.action,
                                             batch.reward, batch.next_obs, batch.next_action,
                                             batch.terminal, grid, 0.99);
        auto loss_at = [&](const nn::MlpParamsT<double>& p) {
            return critic_loss_grads<double>(p, target, batch.obs, batch.action, batch.reward,
                                             batch.next_obs, batch.next_action, batch.terminal,
                                             grid, 0.99)
                .loss;
        };
        double max_rel = 0.0;
        for (std::size_t i = 0; i < critic.data.size(); i += 7) {
            auto p = critic;
            p.data[i] += 1e-4;
            const double up = loss_at(p);
            p.data[i] -= 2e-4;
            const double dn = loss_at(p);
            max_rel = std::max(max_rel, rel_err(res.grads.data[i], (up - dn) / 2e-4));
        }
        EXPECT_LT(max_rel, 1e-4);
    }
}

TEST(CriticLossScalar, GradientMatchesFiniteDifferences) {
    Rng rng(405);
    nn::MlpShape shape{6, 1, 12, 1};
    auto critic = nn::init_mlp<double>(shape, rng);
    auto target = nn::init_mlp<double>(shape, rng);
    auto batch = random_batch(6, 4, 2, rng);

    auto res = critic_loss_grads_scalar<double>(critic, target, batch.obs, batch.action,
                                                batch.reward, batch.next_obs, batch.next_action,
                                                batch.terminal, 0.99);
    double max_rel = 0.0;
    for (std::size_t i = 0; i < critic.data.size(); i += 3) {
        auto p = critic;
        p.data[i] += 1e-4;
        const double up = critic_loss_grads_scalar<double>(p, target, batch.obs, batch.action,
                                                           batch.reward, batch.next_obs,
                                                           batch.next_action, batch.terminal,
                                                           0.99)
                              .loss;
        p.data[i] -= 2e-4;
        const double dn = critic_loss_grads_scalar<double>(p, target, batch.obs, batch.action,
                                                           batch.reward, batch.next_obs,
                                                           batch.next_action, batch.terminal,
                                                           0.99)
                              .loss;
        max_rel = std::max(max_rel, rel_err(res.grads.data[i], (up - dn) / 2e-4));
    }
    EXPECT_LT(max_rel, 1e-4);
}

TEST(CriticLoss, TerminalTransitionsIgnoreTargetNetwork) {
    // with every transition terminal the bootstrap term is masked out, so two
    // arbitrary target networks give the identical loss
    Rng rng(406);
    nn::MlpShape shape{6, 21, 10, 1};
    const AtomGrid grid{-2.0, 2.0, 21};
    auto critic = nn::init_mlp<double>(shape, rng);
    auto target_a = nn::init_mlp<double>(shape, rng);
    auto target_b = nn::init_mlp<double>(shape, rng);
    auto batch = random_batch(8, 4, 2, rng);
    batch.terminal.setOnes();

    auto res_a = critic_loss_grads<double>(critic, target_a, batch.obs, batch.action,
                                           batch.reward, batch.next_obs, batch.next_action,
                                           batch.terminal, grid, 0.99);
    auto res_b = critic_loss_grads<double>(critic, target_b, batch.obs, batch.action,
                                           batch.reward, batch.next_obs, batch.next_action,
                                           batch.terminal, grid, 0.99);
    EXPECT_EQ(res_a.loss, res_b.loss);

    // and the per-sample target is exactly the projected constant reward
    nn::MlpCache<double> cache;
    nn::Mat<double> input(8, 6);
    input.leftCols(4) = batch.obs;
    input.rightCols(2) = batch.action;
    nn::Mat<double> logits = nn::mlp_forward(critic, input, cache);
    double expected = 0.0;
    for (int i = 0; i < 8; ++i) {
        auto proj = project(batch.reward[i], 0.0, CategoricalDistribution::uniform(grid));
        nn::Vec<double> row = logits.row(i);
        expected += cross_entropy_loss<double>(row, proj.probs).first;
    }
    EXPECT_NEAR(res_a.loss, expected / 8, 1e-12);
}

TEST(GaussianNll, GradientMatchesFiniteDifferences) {
    Rng rng(407);
    nn::MlpShape shape{4, 2, 10, 1};
    auto net = nn::init_mlp<double>(shape, rng);
    std::vector<double> log_std{-0.3, 0.4};
    const int b = 6;
    nn::Mat<double> obs(b, 4), u_target(b, 2);
    nn::Vec<double> weights(b);
    for (int i = 0; i < b; ++i) {
        for (int d = 0; d < 4; ++d) obs(i, d) = rng.uniform(-1, 1);
        for (int d = 0; d < 2; ++d) u_target(i, d) = rng.uniform(-2, 2);
        weights[i] = rng.uniform(0.2, 3.0);
    }

    auto res = gaussian_nll_loss_grads<double>(net, log_std, obs, u_target, weights);
    auto loss_at = [&](const nn::MlpParamsT<double>& p, const std::vector<double>& ls) {
        return gaussian_nll_loss_grads<double>(p, ls, obs, u_target, weights).loss;
    };
    double max_rel = 0.0;
    for (std::size_t i = 0; i < net.data.size(); i += 5) {
        auto p = net;
        p.data[i] += 1e-4;
        const double up = loss_at(p, log_std);
        p.data[i] -= 2e-4;
        const double dn = loss_at(p, log_std);
        max_rel = std::max(max_rel, rel_err(res.net_grads.data[i], (up - dn) / 2e-4));
    }
    for (std::size_t d = 0; d < log_std.size(); ++d) {
        auto ls = log_std;
        ls[d] += 1e-5;
        const double up = loss_at(net, ls);
        ls[d] -= 2e-5;
        const double dn = loss_at(net, ls);
        max_rel = std::max(max_rel, rel_err(res.log_std_grads[d], (up - dn) / 2e-5));
    }
    EXPECT_LT(max_rel, 1e-4);
}

TEST(D4pgLoss, GradientMatchesFiniteDifferencesThroughCritic) {
    Rng rng(408);
    const AtomGrid grid{-1.0, 3.0, 15};
    nn::MlpShape policy_shape{4, 2, 8, 1};
    nn::MlpShape critic_shape{6, 15, 10, 1};
    auto policy = nn::init_mlp<double>(policy_shape, rng);
    auto critic = nn::init_mlp<double>(critic_shape, rng);
    nn::Mat<double> obs(5, 4);
    for (int i = 0; i < 5; ++i)
        for (int d = 0; d < 4; ++d) obs(i, d) = rng.uniform(-1, 1);
    nn::Vec<double> low(2), high(2);
    low << -1.0, -1.0;
    high << 1.0, 1.0;

    auto res = d4pg_loss_grads<double>(policy, critic, obs, grid, low, high);
    double max_rel = 0.0;
    for (std::size_t i = 0; i < policy.data.size(); i += 3) {
        auto p = policy;
        p.data[i] += 1e-4;
        const double up = d4pg_loss_grads<double>(p, critic, obs, grid, low, high).loss;
        p.data[i] -= 2e-4;
        const double dn = d4pg_loss_grads<double>(p, critic, obs, grid, low, high).loss;
        max_rel = std::max(max_rel, rel_err(res.net_grads.data[i], (up - dn) / 2e-4));
    }
    EXPECT_LT(max_rel, 1e-4);
}

TEST(D4pgLoss, CriticIgnoringActionGivesZeroPolicyGradient) {
    Rng rng(409);
    const AtomGrid grid{-1.0, 1.0, 11};
    nn::MlpShape policy_shape{3, 2, 8, 0};
    nn::MlpShape critic_shape{5, 11, 8, 0};
    auto policy = nn::init_mlp<double>(policy_shape, rng);
    auto critic = nn::init_mlp<double>(critic_shape, rng);
    // zero the critic's input weights on the action columns
    auto w = critic.input_w();
    for (int r = 0; r < w.rows(); ++r)
        for (int c = 3; c < 5; ++c) w(r, c) = 0.0;

    nn::Mat<double> obs(4, 3);
    for (int i = 0; i < 4; ++i)
        for (int d = 0; d < 3; ++d) obs(i, d) = rng.uniform(-1, 1);
    nn::Vec<double> low(2), high(2);
    low << -1.0, -1.0;
    high << 1.0, 1.0;
    auto res = d4pg_loss_grads<double>(policy, critic, obs, grid, low, high);
    for (double g : res.net_grads.data) EXPECT_NEAR(g, 0.0, 1e-14);
}

TEST(D4pgUpdate, AscendsActionValueInClosedFormDirection) {
    // critic whose mean value strictly increases with the action: ascent must
    // push the policy's action up, descent variant would push it down
    Rng rng(410);
    const AtomGrid grid{0.0, 1.0, 2};
    nn::MlpShape critic_shape{2, 2, 4, 0};
    nn::MlpParams critic_params(critic_shape);
    // hidden = elu(a + 2) = a + 2 > 0; top-atom logit = 8 * hidden
    auto w_in = critic_params.input_w();
    w_in(0, 1) = 1.0f;
    critic_params.input_b()[0] = 2.0f;
    critic_params.output_w()(1, 0) = 8.0f;

    CriticState critic;
    critic.params = critic_params;
    critic.target = critic_params;
    critic.grid = grid;
    critic.distributional = true;
    critic.learning_rate = 1e-2;

    EnvSpec spec{"toy", 1, 1, 10, {-1.0f}, {1.0f}};
    Rng prng(5);
    nn::MlpParams policy = nn::init_mlp<float>({1, 1, 8, 0}, prng);
    nn::AdamState adam(policy.data.size());

    TransitionBatch batch;
    batch.obs.resize(4, 1);
    batch.obs << 0.1f, -0.2f, 0.4f, -0.5f;
    batch.action.resize(4, 1);
    batch.action.setZero();
    batch.next_obs = batch.obs;
    batch.reward.setZero(4);
    batch.terminal.setZero(4);

    auto mean_action = [&](const nn::MlpParams& p) {
        MlpPolicy mp(p, spec.action_low, spec.action_high);
        return mp.act_batch(batch.obs).mean();
    };
    const float before = mean_action(policy);
    float objective = 0.0f;
    for (int t = 0; t < 50; ++t)
        objective = d4pg_policy_update(policy, adam, critic, batch, spec, 1e-2);
    const float after = mean_action(policy);
    EXPECT_GT(after, before + 0.1f);
    EXPECT_GT(objective, 0.0f);
}

TEST(CrrWeight, UnitWeightAtZeroAdvantageAndCapAtLargeAdvantage) {
    // constant critic: all Q values equal, advantage exactly zero
    Rng rng(411);
    const AtomGrid grid{0.0, 1.0, 11};
    CriticState critic = CriticState::init(5, 1, 8, 0, grid, true, 1e-3, rng);
    std::fill(critic.params.data.begin(), critic.params.data.end(), 0.0f);

    GaussianHead head;
    head.mean_net = nn::init_mlp<float>({5, 1, 8, 0}, rng);
    head.log_std.assign(1, -0.5f);

    EnvSpec spec{"toy", 5, 1, 10, {-1.0f}, {1.0f}};
    std::vector<float> obs{1.0f, 0.0f, 0.0f, 0.0f, 0.0f};
    std::vector<float> action{0.5f};
    Rng wrng(1);
    auto w = crr_weight(critic, head, spec, obs, action, 0.1, 4, 20.0, wrng);
    EXPECT_EQ(w.advantage, 0.0);
    EXPECT_EQ(w.weight, 1.0);
    EXPECT_EQ(w.sampled_actions.size(), 4u);

    // random critic with a microscopic beta saturates at the cap whenever the
    // advantage is positive
    CriticState rc = CriticState::init(5, 1, 8, 0, grid, true, 1e-3, rng);
    bool saw_positive = false;
    for (int trial = 0; trial < 20 && !saw_positive; ++trial) {
        std::vector<float> a{static_cast<float>(wrng.uniform(-1, 1))};
        auto res = crr_weight(rc, head, spec, obs, a, 1e-12, 4, 20.0, wrng);
        if (res.advantage > 1e-6) {
            EXPECT_EQ(res.weight, 20.0);
            saw_positive = true;
        }
    }
    EXPECT_TRUE(saw_positive);
}

TEST(CrrWeight, RecomputableFromRecordedActionSamples) {
    Rng rng(412);
    const AtomGrid grid{-1.0, 2.0, 21};
    CriticState critic = CriticState::init(3, 2, 10, 1, grid, true, 1e-3, rng);
    GaussianHead head;
    head.mean_net = nn::init_mlp<float>({3, 2, 10, 1}, rng);
    head.log_std.assign(2, -0.2f);
    EnvSpec spec{"toy", 3, 2, 10, {-1.0f, -1.0f}, {1.0f, 1.0f}};

    std::vector<float> obs{0.3f, -0.4f, 0.8f};
    std::vector<float> action{0.2f, -0.6f};
    const double beta = 0.7;
    Rng wrng(9);
    auto res = crr_weight(critic, head, spec, obs, action, beta, 6, 20.0, wrng);

    ValueCritic vc{critic.params, grid};
    double q_pi = 0.0;
    for (const auto& a : res.sampled_actions) q_pi += vc.q(obs, a);
    q_pi /= static_cast<double>(res.sampled_actions.size());
    const double adv = vc.q(obs, action) - q_pi;
    EXPECT_NEAR(adv, res.advantage, 1e-5);
    EXPECT_NEAR(res.weight, std::min(std::exp(adv / beta), 20.0), 1e-5);
}

TEST(CrrUpdate, ConstantCriticReducesToBcExactly) {
    Rng rng(413);
    const AtomGrid grid{0.0, 1.0, 11};
    CriticState critic = CriticState::init(5, 1, 8, 0, grid, true, 1e-3, rng);
    std::fill(critic.params.data.begin(), critic.params.data.end(), 0.0f);

    auto make_head = [&](uint64_t seed) {
        Rng r(seed);
        GaussianHead h;
        h.mean_net = nn::init_mlp<float>({5, 1, 8, 0}, r);
        h.log_std.assign(1, -0.5f);
        h.net_adam = nn::AdamState(h.mean_net.data.size());
        h.log_std_adam = nn::AdamState(1);
        return h;
    };
    GaussianHead bc_head = make_head(5);
    GaussianHead crr_head = make_head(5);

    Dataset ds = chainwalk_dataset(30, 3);
    auto transitions = ds.all_transitions();
    std::vector<std::size_t> idx{0, 5, 9, 13, 21, 34};
    TransitionBatch batch = TransitionBatch::gather(transitions, idx);
    EnvSpec spec = ds.env_spec;

    TrainerConfig config;
    const float bc_loss = bc_policy_update(bc_head, batch, spec, 1e-3);
    Rng crr_rng(7);
    const float crr_loss =
        crr_policy_update(crr_head, critic, batch, spec, 0.5, config, 1e-3, crr_rng);
    EXPECT_EQ(bc_loss, crr_loss);
    EXPECT_EQ(bc_head.mean_net.data, crr_head.mean_net.data);
    EXPECT_EQ(bc_head.log_std, crr_head.log_std);
}

TEST(CrrUpdate, HugeBetaApproachesBcGradient) {
    Rng rng(414);
    const AtomGrid grid{-0.1, 1.1, 31};
    CriticState critic = CriticState::init(5, 1, 10, 1, grid, true, 1e-3, rng);

    Dataset ds = chainwalk_dataset(30, 11);
    auto transitions = ds.all_transitions();
    std::vector<std::size_t> idx{1, 4, 8, 16, 23, 42};
    TransitionBatch batch = TransitionBatch::gather(transitions, idx);

    GaussianHead head;
    head.mean_net = nn::init_mlp<float>({5, 1, 10, 1}, rng);
    head.log_std.assign(1, -0.5f);

    // weights at beta -> infinity collapse to one
    TrainerConfig config;
    Rng wrng(3);
    nn::VecF ones = nn::VecF::Ones(batch.size());
    nn::VecF weights(batch.size());
    for (Eigen::Index i = 0; i < batch.size(); ++i) {
        std::vector<float> obs(5), act(1);
        for (int d = 0; d < 5; ++d) obs[static_cast<std::size_t>(d)] = batch.obs(i, d);
        act[0] = batch.action(i, 0);
        weights[i] = static_cast<float>(
            crr_weight(critic, head, ds.env_spec, obs, act, 1e6, 4, 20.0, wrng).weight);
    }

    const nn::VecF low = nn::VecF::Constant(1, -1.0f);
    const nn::VecF high = nn::VecF::Constant(1, 1.0f);
    std::vector<float> ls{-0.5f};
    nn::MatF u = squash_preimage<float>(batch.action, low, high);
    auto bc = gaussian_nll_loss_grads<float>(head.mean_net, ls, batch.obs, u, ones);
    auto crr = gaussian_nll_loss_grads<float>(head.mean_net, ls, batch.obs, u, weights);
    for (std::size_t i = 0; i < bc.net_grads.data.size(); ++i)
        EXPECT_NEAR(bc.net_grads.data[i], crr.net_grads.data[i],
                    1e-6 * (1.0 + std::abs(bc.net_grads.data[i])));
}

TEST(BcUpdate, ConvergesToConstantZeroActionData) {
    // logged actions are all zero: the squashed mean must approach zero
    EnvSpec spec{"toy", 2, 1, 50, {-1.0f}, {1.0f}};
    Dataset ds;
    ds.env_spec = spec;
    Rng rng(15);
    for (int e = 0; e < 10; ++e) {
        Episode ep;
        for (int t = 0; t < 20; ++t) {
            Transition tr;
            tr.obs = {static_cast<float>(rng.uniform(-1, 1)),
                      static_cast<float>(rng.uniform(-1, 1))};
            tr.action = {0.0f};
            tr.reward = 0.0f;
            tr.next_obs = tr.obs;
            tr.terminal = t == 19;
            tr.episode_id = e;
            tr.step = t;
            ep.push_back(std::move(tr));
        }
        ds.episodes.push_back(std::move(ep));
    }

    GaussianHead head;
    Rng hr(2);
    head.mean_net = nn::init_mlp<float>({2, 1, 16, 1}, hr);
    head.log_std.assign(1, -0.5f);
    head.net_adam = nn::AdamState(head.mean_net.data.size());
    head.log_std_adam = nn::AdamState(1);

    auto transitions = ds.all_transitions();
    Rng brng(3);
    float first_loss = 0, last_loss = 0;
    for (int step = 0; step < 800; ++step) {
        std::vector<std::size_t> idx(16);
        for (auto& i : idx) i = brng.below(transitions.size());
        TransitionBatch batch = TransitionBatch::gather(transitions, idx);
        const float loss = bc_policy_update(head, batch, spec, 1e-2);
        if (step == 0) first_loss = loss;
        last_loss = loss;
    }
    EXPECT_LT(last_loss, first_loss);

    MlpPolicy policy(head.mean_net, spec.action_low, spec.action_high);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<float> obs{static_cast<float>(rng.uniform(-1, 1)),
                               static_cast<float>(rng.uniform(-1, 1))};
        auto a = policy.act(obs, 1);
        EXPECT_NEAR(a[0], 0.0f, 0.05f);
    }
}

TEST(BcUpdate, NeverReadsTheCritic) {
    Dataset ds = chainwalk_dataset(20, 21);
    auto transitions = ds.all_transitions();
    std::vector<std::size_t> idx{0, 3, 7, 11};
    TransitionBatch batch = TransitionBatch::gather(transitions, idx);

    GaussianHead head;
    Rng hr(4);
    head.mean_net = nn::init_mlp<float>({5, 1, 8, 0}, hr);
    head.log_std.assign(1, -0.5f);

    const auto before = policy_update_critic_reads();
    bc_policy_update(head, batch, ds.env_spec, 1e-3);
    EXPECT_EQ(policy_update_critic_reads(), before);

    // CRR and D4PG do consult the critic
    Rng rng(5);
    CriticState critic = CriticState::init(5, 1, 8, 0, kChainGrid, true, 1e-3, rng);
    TrainerConfig config;
    Rng wrng(6);
    crr_policy_update(head, critic, batch, ds.env_spec, 1.0, config, 1e-3, wrng);
    EXPECT_GT(policy_update_critic_reads(), before);
}

TEST(BcTraining, RecoversExpertOnChainWalk) {
    Dataset ds = chainwalk_dataset(120, 33, {0.0, 0.3});
    HyperparameterSetting setting;
    setting.algorithm = Algorithm::BC;
    setting.hidden_size = 32;
    setting.num_blocks = 1;
    setting.learning_rate = 1e-3;
    setting.learner_steps = 3000;
    setting.seed = 77;
    TrainerConfig config;
    PolicyArtifact artifact = train(ds, setting, config, kChainGrid);
    ASSERT_FALSE(artifact.failed);

    // mean action agrees in sign with the expert on every chain state
    ChainWalk env;
    MlpPolicy policy = artifact.make_policy(env.spec());
    int agree = 0;
    for (int s = 0; s < env.num_states(); ++s) {
        auto obs = env.state_obs(s);
        auto a = policy.act(obs, 1);
        if (a[0] > 0.0f) ++agree;
    }
    EXPECT_EQ(agree, env.num_states());

    auto expert = make_expert("chainwalk");
    auto v_expert = actual_value(env, *expert, 50, 0.99, 1);
    auto v_bc = actual_value(env, policy, 50, 0.99, 1);
    EXPECT_NEAR(v_bc.mean, v_expert.mean, 0.05 * std::abs(v_expert.mean));
}

TEST(CriticTraining, ConvergesToDpValuesOnChainWalk) {
    // fixed always-right policy; repeated shared critic updates must drive
    // dist_mean(Q(s, pi(s))) to the dynamic-programming values
    Dataset ds = chainwalk_dataset(150, 41);
    auto transitions = ds.all_transitions();
    FnPolicy right([](std::span<const float>, std::span<float> a) { a[0] = 0.9f; });

    Rng rng(8);
    CriticState critic = CriticState::init(5, 1, 48, 1, kChainGrid, true, 1e-3, rng);
    Rng brng(9);
    for (int step = 0; step < 4000; ++step) {
        std::vector<std::size_t> idx(32);
        for (auto& i : idx) i = brng.below(transitions.size());
        TransitionBatch batch = TransitionBatch::gather(transitions, idx);
        critic_update(critic, batch, right, 0.99);
        if (step % 100 == 0) sync_target(critic);
    }

    ChainWalk env;
    auto dp = dp_policy_evaluation(static_cast<const Environment&>(env), right, 0.99, 1e-12);
    ValueCritic vc{critic.params, kChainGrid};
    for (int s = 0; s < env.num_states(); ++s) {
        auto obs = env.state_obs(s);
        auto a = right.act(obs, 1);
        EXPECT_NEAR(vc.q(obs, a), dp[static_cast<std::size_t>(s)], 0.05) << "state " << s;
    }
}

TEST(TargetNetwork, ChangesOnlyAtSyncAndThenEqualsOnline) {
    Dataset ds = chainwalk_dataset(30, 51);
    auto transitions = ds.all_transitions();
    FnPolicy right([](std::span<const float>, std::span<float> a) { a[0] = 0.9f; });

    Rng rng(10);
    CriticState critic = CriticState::init(5, 1, 8, 0, kChainGrid, true, 1e-3, rng);
    const int period = 10;
    auto target_before = critic.target.data;
    Rng brng(11);
    for (int step = 0; step < 35; ++step) {
        std::vector<std::size_t> idx(8);
        for (auto& i : idx) i = brng.below(transitions.size());
        TransitionBatch batch = TransitionBatch::gather(transitions, idx);
        critic_update(critic, batch, right, 0.99);
        if (step % period == 0) {
            sync_target(critic);
            EXPECT_EQ(critic.target.data, critic.params.data);
            target_before = critic.target.data;
        } else {
            EXPECT_EQ(critic.target.data, target_before);
        }
    }
}

TEST(Train, ZeroLearnerStepsReturnsInitialization) {
    Dataset ds = chainwalk_dataset(20, 61);
    HyperparameterSetting setting;
    setting.algorithm = Algorithm::BC;
    setting.hidden_size = 16;
    setting.learner_steps = 0;
    setting.seed = 3;
    TrainerConfig config;
    PolicyArtifact a = train(ds, setting, config, kChainGrid);
    PolicyArtifact b = train(ds, setting, config, kChainGrid);
    EXPECT_EQ(a.policy_params.data, b.policy_params.data);
    EXPECT_EQ(a.orl_critic_params.data, b.orl_critic_params.data);
    EXPECT_TRUE(a.critic_losses.empty());
    EXPECT_FALSE(a.failed);
}

TEST(Train, DeterministicGivenSeedForEveryAlgorithm) {
    Dataset ds = chainwalk_dataset(40, 71);
    for (Algorithm algo : {Algorithm::BC, Algorithm::CRR, Algorithm::D4PG}) {
        HyperparameterSetting setting;
        setting.algorithm = algo;
        setting.hidden_size = 16;
        setting.num_blocks = 1;
        setting.learning_rate = 1e-3;
        setting.learner_steps = 120;
        setting.seed = 99;
        if (algo == Algorithm::CRR) setting.beta = 0.5;
        TrainerConfig config;
        config.batch_size = 8;
        PolicyArtifact a = train(ds, setting, config, kChainGrid);
        PolicyArtifact b = train(ds, setting, config, kChainGrid);
        EXPECT_EQ(a.policy_params.data, b.policy_params.data) << to_string(algo);
        EXPECT_EQ(a.orl_critic_params.data, b.orl_critic_params.data) << to_string(algo);
        EXPECT_EQ(a.policy_log_std, b.policy_log_std) << to_string(algo);
    }
}

TEST(Train, SnapshotsMatchSeparateRunsBitwise) {
    Dataset ds = chainwalk_dataset(40, 81);
    HyperparameterSetting setting;
    setting.algorithm = Algorithm::CRR;
    setting.beta = 0.5;
    setting.hidden_size = 16;
    setting.num_blocks = 1;
    setting.learning_rate = 1e-3;
    setting.seed = 13;
    TrainerConfig config;
    config.batch_size = 8;

    setting.learner_steps = 90;
    auto snaps = train_with_snapshots(ds, setting, {30, 90}, config, kChainGrid);
    ASSERT_EQ(snaps.size(), 2u);

    setting.learner_steps = 30;
    PolicyArtifact at30 = train(ds, setting, config, kChainGrid);
    setting.learner_steps = 90;
    PolicyArtifact at90 = train(ds, setting, config, kChainGrid);

    EXPECT_EQ(snaps[0].policy_params.data, at30.policy_params.data);
    EXPECT_EQ(snaps[0].orl_critic_params.data, at30.orl_critic_params.data);
    EXPECT_EQ(snaps[1].policy_params.data, at90.policy_params.data);
    EXPECT_EQ(snaps[1].orl_critic_params.data, at90.orl_critic_params.data);
    EXPECT_EQ(snaps[0].policy_id, "crr_h16_b1_lr0.001_beta0.5_s30");
}

TEST(Train, SharedCriticPathIsIdenticalAcrossAlgorithms) {
    // one critic step with precomputed actions equals one step through the
    // policy overload: both are the same operation
    Dataset ds = chainwalk_dataset(30, 91);
    auto transitions = ds.all_transitions();
    std::vector<std::size_t> idx{0, 2, 4, 6, 8, 10, 12, 14};
    TransitionBatch batch = TransitionBatch::gather(transitions, idx);

    Rng rng(12);
    nn::MlpParams net = nn::init_mlp<float>({5, 1, 12, 1}, rng);
    MlpPolicy policy(net, ds.env_spec.action_low, ds.env_spec.action_high);

    Rng crng(13);
    CriticState c1 = CriticState::init(5, 1, 12, 1, kChainGrid, true, 1e-3, crng);
    CriticState c2 = c1;

    const float l1 = critic_update(c1, batch, policy, 0.99);
    const float l2 = critic_update(c2, batch, policy.act_batch(batch.next_obs), 0.99);
    EXPECT_EQ(l1, l2);
    EXPECT_EQ(c1.params.data, c2.params.data);
}
