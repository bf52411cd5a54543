#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ohs/metrics.hpp"
#include "ohs/stats.hpp"

namespace ohs {

inline constexpr const char* kReportVersionLine = "# ohs-report v1";

// Deterministic float formatting shared by every report writer.
std::string format_number(double v);

struct GroundTruthEntry {
    std::string policy_id;
    double mean = 0.0;
    double stderr_ = 0.0;
    int n_episodes = 0;
};

// columns: policy_id,algorithm,source,statistic,params,value,actual_value,abs_error
void write_statistics_csv(const std::filesystem::path& path,
                          const std::vector<StatisticValue>& statistics,
                          const std::map<std::string, double>& actual_values);

// columns: statistic,source,group,params,n_policies,spearman,
//          regret_at_<k>...,norm_regret_at_<k>...,mean_abs_error,median_regret_baseline
void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<RankingMetrics>& metrics, const std::vector<int>& ks);

// estimate-vs-actual scatter rows (v_s0 only):
// columns: policy_id,algorithm,source,estimate,actual
void write_scatter_csv(const std::filesystem::path& path,
                       const std::vector<StatisticValue>& statistics,
                       const std::map<std::string, double>& actual_values);

struct FqeStepPoint {
    std::int64_t checkpoint = 0;
    std::string group;
    bool spearman_defined = false;
    double spearman_value = 0.0;
};

// rank-correlation-vs-learner-steps rows: columns: checkpoint,group,spearman
void write_fqe_steps_csv(const std::filesystem::path& path,
                         const std::vector<FqeStepPoint>& points);

void write_ground_truth_csv(const std::filesystem::path& path,
                            const std::vector<GroundTruthEntry>& entries);
std::vector<GroundTruthEntry> read_ground_truth_csv(const std::filesystem::path& path);

// stage-intermediate statistic rows (no actuals yet):
// columns: policy_id,algorithm,source,statistic,params,value
void write_stats_csv(const std::filesystem::path& path,
                     const std::vector<StatisticValue>& statistics);
std::vector<StatisticValue> read_stats_csv(const std::filesystem::path& path);

}  // namespace ohs
