#include "ohs/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "ohs/errors.hpp"
#include "ohs/rng.hpp"

namespace ohs {

namespace {

double wrap_angle(double th) {
    th = std::fmod(th + M_PI, 2.0 * M_PI);
    if (th < 0) th += 2.0 * M_PI;
    return th - M_PI;
}

// sum_{t=0}^{h-1} gamma^t
double discount_sum(double gamma, int horizon) {
    if (gamma == 1.0) return horizon;
    return (1.0 - std::pow(gamma, horizon)) / (1.0 - gamma);
}

float clip_component(float a, float lo, float hi, bool* clipped) {
    if (a < lo) {
        *clipped = true;
        return lo;
    }
    if (a > hi) {
        *clipped = true;
        return hi;
    }
    return a;
}

std::vector<float> clip_action(const EnvSpec& spec, std::span<const float> action,
                               bool* clipped) {
    if (static_cast<int>(action.size()) != spec.act_dim)
        throw std::invalid_argument("step: action has dimension " +
                                    std::to_string(action.size()) + ", expected " +
                                    std::to_string(spec.act_dim));
    std::vector<float> out(action.size());
    for (std::size_t i = 0; i < action.size(); ++i)
        out[i] = clip_component(action[i], spec.action_low[i], spec.action_high[i], clipped);
    return out;
}

}  // namespace

void EnvSpec::validate() const {
    if (obs_dim < 1 || act_dim < 1) throw std::invalid_argument("EnvSpec: dims must be positive");
    if (horizon < 1) throw std::invalid_argument("EnvSpec: horizon must be >= 1");
    if (static_cast<int>(action_low.size()) != act_dim ||
        static_cast<int>(action_high.size()) != act_dim)
        throw std::invalid_argument("EnvSpec: bounds size mismatch");
    for (int i = 0; i < act_dim; ++i) {
        if (!std::isfinite(action_low[i]) || !std::isfinite(action_high[i]) ||
            !(action_low[i] < action_high[i]))
            throw std::invalid_argument("EnvSpec: bounds must be finite with low < high");
    }
}

std::size_t Dataset::n_transitions() const {
    std::size_t n = 0;
    for (const auto& ep : episodes) n += ep.size();
    return n;
}

std::vector<const Transition*> Dataset::initial_transitions() const {
    std::vector<const Transition*> out;
    out.reserve(episodes.size());
    for (const auto& ep : episodes)
        if (!ep.empty()) out.push_back(&ep.front());
    return out;
}

std::vector<const Transition*> Dataset::all_transitions() const {
    std::vector<const Transition*> out;
    out.reserve(n_transitions());
    for (const auto& ep : episodes)
        for (const auto& t : ep) out.push_back(&t);
    return out;
}

std::vector<double> Dataset::episode_returns(double gamma) const {
    std::vector<double> out;
    out.reserve(episodes.size());
    for (const auto& ep : episodes) {
        double g = 0.0, d = 1.0;
        for (const auto& t : ep) {
            g += d * t.reward;
            d *= gamma;
        }
        out.push_back(g);
    }
    return out;
}

void Dataset::validate() const {
    env_spec.validate();
    std::set<std::int32_t> ids;
    for (const auto& ep : episodes) {
        if (ep.empty()) throw std::invalid_argument("Dataset: empty episode");
        if (!ids.insert(ep.front().episode_id).second)
            throw std::invalid_argument("Dataset: duplicate episode id");
        for (std::size_t i = 0; i < ep.size(); ++i) {
            const Transition& t = ep[i];
            if (static_cast<int>(t.obs.size()) != env_spec.obs_dim ||
                static_cast<int>(t.next_obs.size()) != env_spec.obs_dim ||
                static_cast<int>(t.action.size()) != env_spec.act_dim)
                throw std::invalid_argument("Dataset: dimension mismatch");
            if (t.episode_id != ep.front().episode_id)
                throw std::invalid_argument("Dataset: inconsistent episode id");
            if (t.step < 0 || t.step >= env_spec.horizon)
                throw std::invalid_argument("Dataset: step outside [0, horizon)");
            if (t.terminal && i + 1 != ep.size())
                throw std::invalid_argument("Dataset: terminal before episode end");
            for (int d = 0; d < env_spec.act_dim; ++d) {
                if (t.action[d] < env_spec.action_low[d] || t.action[d] > env_spec.action_high[d])
                    throw std::invalid_argument("Dataset: action outside bounds");
            }
        }
    }
}

// --- ChainWalk ---

ChainWalk::ChainWalk() {
    spec_ = {"chainwalk", kNumStates, 1, kHorizon, {-1.0f}, {1.0f}};
}

std::vector<float> ChainWalk::reset(std::uint64_t /*seed*/) {
    pos_ = 0;
    steps_ = 0;
    return state_obs(pos_);
}

std::vector<float> ChainWalk::state_obs(int state) const {
    std::vector<float> obs(kNumStates, 0.0f);
    obs[state] = 1.0f;
    return obs;
}

ChainWalk::TabularStep ChainWalk::transition(int state, std::span<const float> action) const {
    if (state == kNumStates - 1) return {state, 1.0, true};
    const int next = action[0] > 0.0f ? std::min(state + 1, kNumStates - 1)
                                      : std::max(state - 1, 0);
    return {next, 0.0, false};
}

Environment::StepResult ChainWalk::step(std::span<const float> action) {
    StepResult res;
    auto a = clip_action(spec_, action, &res.clipped);
    TabularStep ts = transition(pos_, a);
    pos_ = ts.next_state;
    steps_ += 1;
    res.reward = static_cast<float>(ts.reward);
    res.terminal = ts.terminal || steps_ >= kHorizon;
    res.next_obs = state_obs(pos_);
    return res;
}

// --- PointMassReach ---

PointMassReach::PointMassReach() {
    spec_ = {"pointmass", 4, 2, kHorizon, {-1.0f, -1.0f}, {1.0f, 1.0f}};
}

std::vector<float> PointMassReach::reset(std::uint64_t seed) {
    Rng rng(seed);
    px_ = static_cast<float>(rng.uniform(-0.9, 0.9));
    py_ = static_cast<float>(rng.uniform(-0.9, 0.9));
    vx_ = vy_ = 0.0f;
    steps_ = 0;
    return {px_, py_, vx_, vy_};
}

Environment::StepResult PointMassReach::step(std::span<const float> action) {
    StepResult res;
    auto a = clip_action(spec_, action, &res.clipped);
    vx_ = kDamping * vx_ + kDt * a[0];
    vy_ = kDamping * vy_ + kDt * a[1];
    px_ = std::clamp(px_ + kDt * vx_, -kPosLimit, kPosLimit);
    py_ = std::clamp(py_ + kDt * vy_, -kPosLimit, kPosLimit);
    steps_ += 1;
    res.reward = -std::sqrt(px_ * px_ + py_ * py_);
    res.terminal = steps_ >= kHorizon;
    res.next_obs = {px_, py_, vx_, vy_};
    return res;
}

std::pair<double, double> PointMassReach::value_bounds(double gamma) const {
    const double max_dist = std::sqrt(2.0) * kPosLimit;
    return {-max_dist * discount_sum(gamma, kHorizon), 0.0};
}

// --- SwingupLite ---

SwingupLite::SwingupLite() {
    spec_ = {"swingup", 3, 1, kHorizon, {-1.0f}, {1.0f}};
}

std::vector<float> SwingupLite::reset(std::uint64_t seed) {
    Rng rng(seed);
    theta_ = wrap_angle(M_PI + rng.uniform(-0.1, 0.1));
    theta_dot_ = rng.uniform(-0.05, 0.05);
    steps_ = 0;
    return {static_cast<float>(std::cos(theta_)), static_cast<float>(std::sin(theta_)),
            static_cast<float>(theta_dot_)};
}

Environment::StepResult SwingupLite::step(std::span<const float> action) {
    StepResult res;
    auto a = clip_action(spec_, action, &res.clipped);
    const double torque = kTorqueScale * a[0];
    const double accel = kGravity * std::sin(theta_) + kTorqueCoef * torque;
    theta_dot_ = std::clamp(theta_dot_ + kDt * accel, -kMaxSpeed, kMaxSpeed);
    theta_ = wrap_angle(theta_ + kDt * theta_dot_);
    steps_ += 1;
    res.reward = static_cast<float>(std::cos(theta_));
    res.terminal = steps_ >= kHorizon;
    res.next_obs = {static_cast<float>(std::cos(theta_)), static_cast<float>(std::sin(theta_)),
                    static_cast<float>(theta_dot_)};
    return res;
}

std::pair<double, double> SwingupLite::value_bounds(double gamma) const {
    const double s = discount_sum(gamma, kHorizon);
    return {-s, s};
}

// --- registry & experts ---

std::unique_ptr<Environment> make_env(const std::string& name) {
    if (name == "chainwalk") return std::make_unique<ChainWalk>();
    if (name == "pointmass") return std::make_unique<PointMassReach>();
    if (name == "swingup") return std::make_unique<SwingupLite>();
    throw ConfigError("unknown environment '" + name + "'");
}

std::unique_ptr<Policy> make_expert(const std::string& env_name) {
    if (env_name == "chainwalk") {
        return std::make_unique<FnPolicy>(
            [](std::span<const float>, std::span<float> a) { a[0] = 0.9f; });
    }
    if (env_name == "pointmass") {
        return std::make_unique<FnPolicy>([](std::span<const float> obs, std::span<float> a) {
            const float kp = 3.0f, kd = 1.5f;
            a[0] = std::clamp(-kp * obs[0] - kd * obs[2], -1.0f, 1.0f);
            a[1] = std::clamp(-kp * obs[1] - kd * obs[3], -1.0f, 1.0f);
        });
    }
    if (env_name == "swingup") {
        return std::make_unique<FnPolicy>([](std::span<const float> obs, std::span<float> a) {
            const double th = std::atan2(obs[1], obs[0]);
            const double thd = obs[2];
            double u;
            if (obs[0] > 0.9 && std::abs(thd) < 2.5) {
                u = -10.0 * th - 2.0 * thd;
            } else {
                const double e = SwingupLite::energy(th, thd);
                u = 2.0 * thd * (SwingupLite::kGravity - e);
                if (std::abs(thd) < 0.05 && obs[0] < 0) u = SwingupLite::kTorqueScale;
            }
            a[0] = static_cast<float>(std::clamp(u / SwingupLite::kTorqueScale, -1.0, 1.0));
        });
    }
    throw ConfigError("no expert registered for environment '" + env_name + "'");
}

// --- ground truth ---

ActualValue actual_value(Environment& env, const Policy& policy, int n_episodes, double gamma,
                         std::uint64_t seed) {
    if (n_episodes < 1) throw std::invalid_argument("actual_value: n_episodes must be >= 1");
    if (!(gamma > 0.0 && gamma <= 1.0))
        throw std::invalid_argument("actual_value: gamma must be in (0, 1]");
    const int act_dim = env.spec().act_dim;
    std::vector<double> returns;
    returns.reserve(n_episodes);
    std::vector<float> action(act_dim);
    for (int i = 0; i < n_episodes; ++i) {
        std::vector<float> obs = env.reset(derive_seed(seed, i));
        double g = 0.0, d = 1.0;
        for (int t = 0; t < env.spec().horizon; ++t) {
            policy.act(obs, action);
            auto res = env.step(action);
            g += d * res.reward;
            d *= gamma;
            obs = std::move(res.next_obs);
            if (res.terminal) break;
        }
        returns.push_back(g);
    }
    ActualValue out;
    out.n_episodes = n_episodes;
    double sum = 0.0;
    for (double r : returns) sum += r;
    out.mean = sum / n_episodes;
    if (n_episodes > 1) {
        double ss = 0.0;
        for (double r : returns) ss += (r - out.mean) * (r - out.mean);
        out.stderr_ = std::sqrt(ss / (n_episodes - 1)) / std::sqrt(double(n_episodes));
    }
    return out;
}

// --- dynamic-programming oracle ---

std::vector<double> dp_policy_evaluation(const TabularEnv& env, const Policy& policy,
                                         double gamma, double tol, int max_sweeps,
                                         std::vector<double>* residuals) {
    const int n = env.num_states();
    // deterministic policy and dynamics: resolve each state's transition once
    std::vector<TabularEnv::TabularStep> steps(n);
    for (int s = 0; s < n; ++s) {
        auto obs = env.state_obs(s);
        auto action = policy.act(obs, env.action_dim());
        steps[s] = env.transition(s, action);
    }
    std::vector<double> v(n, 0.0), v_next(n, 0.0);
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double residual = 0.0;
        for (int s = 0; s < n; ++s) {
            const auto& ts = steps[s];
            v_next[s] = ts.reward + (ts.terminal ? 0.0 : gamma * v[ts.next_state]);
            residual = std::max(residual, std::abs(v_next[s] - v[s]));
        }
        v.swap(v_next);
        if (residuals) residuals->push_back(residual);
        if (residual < tol) return v;
    }
    throw Error("dp_policy_evaluation: no fixed point within max_sweeps");
}

std::vector<double> dp_policy_evaluation(const Environment& env, const Policy& policy,
                                         double gamma, double tol, int max_sweeps,
                                         std::vector<double>* residuals) {
    const TabularEnv* tab = env.tabular();
    if (!tab)
        throw UnsupportedError("dp_policy_evaluation: environment '" + env.spec().name +
                               "' is not tabular");
    return dp_policy_evaluation(*tab, policy, gamma, tol, max_sweeps, residuals);
}

// --- behavior data ---

Dataset generate_dataset(Environment& env, const Policy& expert, const BehaviorSpec& behavior,
                         int n_episodes, std::uint64_t seed) {
    if (n_episodes < 1) throw std::invalid_argument("generate_dataset: n_episodes must be >= 1");
    if (behavior.epsilon_schedule.empty())
        throw std::invalid_argument("generate_dataset: empty epsilon schedule");
    const EnvSpec& spec = env.spec();
    Dataset ds;
    ds.env_spec = spec;

    const std::size_t chunks = behavior.epsilon_schedule.size();
    std::vector<float> action(spec.act_dim);
    for (int i = 0; i < n_episodes; ++i) {
        const double eps =
            behavior.epsilon_schedule[std::min(chunks - 1, static_cast<std::size_t>(i) * chunks /
                                                               n_episodes)];
        Rng noise(derive_seed(seed, 2 * static_cast<std::uint64_t>(i) + 1));
        Episode ep;
        std::vector<float> obs = env.reset(derive_seed(seed, 2 * static_cast<std::uint64_t>(i)));
        for (int t = 0; t < spec.horizon; ++t) {
            if (noise.uniform01() < eps) {
                for (int d = 0; d < spec.act_dim; ++d)
                    action[d] = static_cast<float>(
                        noise.uniform(spec.action_low[d], spec.action_high[d]));
            } else {
                expert.act(obs, action);
            }
            auto res = env.step(action);
            Transition tr;
            tr.obs = obs;
            tr.action = action;
            tr.reward = res.reward;
            tr.next_obs = res.next_obs;
            tr.terminal = res.terminal;
            tr.episode_id = i;
            tr.step = t;
            ep.push_back(std::move(tr));
            obs = std::move(res.next_obs);
            if (ep.back().terminal) break;
        }
        ds.episodes.push_back(std::move(ep));
    }

    char meta[256];
    std::string sched;
    for (std::size_t i = 0; i < behavior.epsilon_schedule.size(); ++i) {
        if (i) sched += ",";
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%g", behavior.epsilon_schedule[i]);
        sched += buf;
    }
    std::snprintf(meta, sizeof(meta),
                  "{\"behavior\":\"expert+uniform\",\"epsilon_schedule\":[%s],\"episodes\":%d,"
                  "\"seed\":%llu}",
                  sched.c_str(), n_episodes, static_cast<unsigned long long>(seed));
    ds.behavior_meta = meta;
    return ds;
}

Dataset generate_dataset(Environment& env, const BehaviorSpec& behavior, int n_episodes,
                         std::uint64_t seed) {
    auto expert = make_expert(env.spec().name);
    return generate_dataset(env, *expert, behavior, n_episodes, seed);
}

}  // namespace ohs
