#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ohs/distrib.hpp"
#include "ohs/env.hpp"
#include "ohs/nn.hpp"
#include "ohs/policy.hpp"

namespace ohs {

// A critic usable for scalar Q queries: distributional (dist_mean over the
// atom grid) when a grid is attached, raw scalar output otherwise.
struct ValueCritic {
    nn::MlpParams params;
    std::optional<AtomGrid> grid;

    double q(std::span<const float> obs, std::span<const float> action) const;
    // one Q value per row
    Eigen::VectorXd q_batch(const nn::MatF& obs, const nn::MatF& action) const;
};

// Mean critic value over the dataset's episode-initial states under the
// policy's evaluation action: the primary ranking statistic.
double v_s0(const ValueCritic& critic, const Policy& policy, const Dataset& dataset);

// Mean critic value over all logged states under the policy's action.
double avg_q(const ValueCritic& critic, const Policy& policy, const Dataset& dataset);

// Mean of r + gamma * Q(s', pi(s')) - Q(s, a) over all tuples, with zero
// discount at terminals.
double td_err(const ValueCritic& critic, const Policy& policy, const Dataset& dataset,
              double gamma);

// E[Q(s,a) | successful trajectory] - E[Q(s,a)] over logged pairs; a
// trajectory is successful when its discounted return exceeds the threshold.
// Throws UndefinedStatistic when no trajectory succeeds.
double soft_opc(const ValueCritic& critic, const Dataset& dataset, double gamma,
                double threshold);

// Deciles (10%..90%) of the empirical discounted episode-return distribution.
std::vector<double> default_soft_opc_thresholds(const Dataset& dataset, double gamma);

// One computed statistic for one policy.
struct StatisticValue {
    std::string policy_id;
    std::string algorithm;           // group label
    std::string source;              // "ORL" or "OPE"
    std::string kind;                // "v_s0", "soft_opc", "avg_q", "td_err"
    std::optional<double> params;    // soft-OPC threshold
    double value = 0.0;              // NaN when the statistic is undefined
};

}  // namespace ohs
