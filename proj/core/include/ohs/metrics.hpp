#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ohs/stats.hpp"

namespace ohs {

// Tie-aware average ranks (1-based).
std::vector<double> average_ranks(std::span<const double> values);

// Rank both inputs with average ranks, then Pearson-correlate the ranks.
// Throws UndefinedStatistic when either rank vector has zero variance or the
// inputs have fewer than two entries.
double spearman(std::span<const double> stat_values, std::span<const double> actual_values);

// max(actual) minus the best actual value among the k policies with the
// largest statistic values. Ties in the statistic break by stable input
// order (policy id order).
double regret_at_k(std::span<const double> stat_values, std::span<const double> actual_values,
                   int k);

double abs_error(double stat_value, double actual_value);

double median(std::vector<double> values);

// Regret of picking the policy of median actual value (lower middle for even
// counts): the baseline drawn as the horizontal line in the regret plots.
double median_value_regret(std::span<const double> actual_values);

struct RankingMetrics {
    std::string statistic;
    std::string source;  // "ORL" or "OPE"
    std::string group;   // algorithm name or "all"
    std::optional<double> params;
    int n_policies = 0;
    bool spearman_defined = false;
    double spearman_value = 0.0;  // NaN when undefined
    std::map<int, double> regret;             // k -> regret@k
    std::map<int, double> normalized_regret;  // k -> regret@k / |best actual|
    double mean_abs_error = 0.0;
    double median_regret_baseline = 0.0;
};

// Metrics per (statistic kind, source, params, group) over policies with a
// defined statistic and a ground-truth value. Groups with fewer than two
// policies are skipped. For soft_opc an extra row per (source, group) labeled
// "soft_opc_best" carries the best threshold by Spearman.
std::vector<RankingMetrics> rank_report(const std::vector<StatisticValue>& statistics,
                                        const std::map<std::string, double>& actual_values,
                                        const std::vector<int>& ks);

}  // namespace ohs
