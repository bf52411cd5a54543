#include "ohs/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "ohs/errors.hpp"

namespace ohs {

std::vector<double> average_ranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

double spearman(std::span<const double> stat_values, std::span<const double> actual_values) {
    if (stat_values.size() != actual_values.size())
        throw std::invalid_argument("spearman: length mismatch");
    if (stat_values.size() < 2)
        throw UndefinedStatistic("spearman: need at least two policies");
    const auto rx = average_ranks(stat_values);
    const auto ry = average_ranks(actual_values);
    const auto n = static_cast<double>(rx.size());

    double mx = 0, my = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0)
        throw UndefinedStatistic("spearman: zero variance in ranks");
    return sxy / std::sqrt(sxx * syy);
}

double regret_at_k(std::span<const double> stat_values, std::span<const double> actual_values,
                   int k) {
    if (stat_values.size() != actual_values.size())
        throw std::invalid_argument("regret_at_k: length mismatch");
    const auto n = stat_values.size();
    if (n == 0 || k < 1 || static_cast<std::size_t>(k) > n)
        throw std::invalid_argument("regret_at_k: k must be in [1, N]");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    // descending by statistic; stable, so ties resolve by input (policy id) order
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return stat_values[a] > stat_values[b];
    });

    double best_all = -std::numeric_limits<double>::infinity();
    for (double v : actual_values) best_all = std::max(best_all, v);
    double best_topk = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < k; ++i)
        best_topk = std::max(best_topk, actual_values[order[static_cast<std::size_t>(i)]]);
    return best_all - best_topk;
}

double abs_error(double stat_value, double actual_value) {
    return std::abs(stat_value - actual_value);
}

double median(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("median: empty input");
    std::sort(values.begin(), values.end());
    return values[(values.size() - 1) / 2];  // lower middle for even counts
}

double median_value_regret(std::span<const double> actual_values) {
    std::vector<double> v(actual_values.begin(), actual_values.end());
    double best = *std::max_element(v.begin(), v.end());
    return best - median(std::move(v));
}

namespace {

struct GroupKey {
    std::string kind;
    std::string source;
    std::optional<double> params;
    std::string group;

    bool operator<(const GroupKey& o) const {
        if (kind != o.kind) return kind < o.kind;
        if (source != o.source) return source < o.source;
        if (params != o.params) return params < o.params;
        return group < o.group;
    }
};

RankingMetrics compute_group(const GroupKey& key, const std::vector<double>& stats,
                             const std::vector<double>& actuals, const std::vector<int>& ks) {
    RankingMetrics m;
    m.statistic = key.kind;
    m.source = key.source;
    m.group = key.group;
    m.params = key.params;
    m.n_policies = static_cast<int>(stats.size());
    try {
        m.spearman_value = spearman(stats, actuals);
        m.spearman_defined = true;
    } catch (const UndefinedStatistic&) {
        m.spearman_value = std::numeric_limits<double>::quiet_NaN();
        m.spearman_defined = false;
    }
    const double best = *std::max_element(actuals.begin(), actuals.end());
    for (int k : ks) {
        const int k_eff = std::min<int>(k, m.n_policies);
        const double r = regret_at_k(stats, actuals, k_eff);
        m.regret[k] = r;
        m.normalized_regret[k] =
            std::abs(best) > 0 ? r / std::abs(best) : std::numeric_limits<double>::quiet_NaN();
    }
    double mae = 0.0;
    for (std::size_t i = 0; i < stats.size(); ++i) mae += std::abs(stats[i] - actuals[i]);
    m.mean_abs_error = mae / static_cast<double>(stats.size());
    m.median_regret_baseline = median_value_regret(actuals);
    return m;
}

}  // namespace

std::vector<RankingMetrics> rank_report(const std::vector<StatisticValue>& statistics,
                                        const std::map<std::string, double>& actual_values,
                                        const std::vector<int>& ks) {
    // sort rows by policy id for deterministic tie-breaking
    std::vector<const StatisticValue*> rows;
    rows.reserve(statistics.size());
    for (const auto& s : statistics) rows.push_back(&s);
    std::stable_sort(rows.begin(), rows.end(), [](const StatisticValue* a,
                                                  const StatisticValue* b) {
        return a->policy_id < b->policy_id;
    });

    std::map<GroupKey, std::pair<std::vector<double>, std::vector<double>>> groups;
    for (const StatisticValue* s : rows) {
        if (std::isnan(s->value)) continue;  // undefined statistic: reported, not ranked
        auto it = actual_values.find(s->policy_id);
        if (it == actual_values.end()) continue;
        for (const std::string& group : {s->algorithm, std::string("all")}) {
            auto& [sv, av] = groups[GroupKey{s->kind, s->source, s->params, group}];
            sv.push_back(s->value);
            av.push_back(it->second);
        }
    }

    std::vector<RankingMetrics> out;
    for (const auto& [key, data] : groups) {
        if (data.first.size() < 2) continue;  // skipped with notice by the caller
        out.push_back(compute_group(key, data.first, data.second, ks));
    }

    // best soft-OPC threshold per (source, group), ranked by Spearman
    std::map<std::pair<std::string, std::string>, const RankingMetrics*> best;
    for (const auto& m : out) {
        if (m.statistic != "soft_opc" || !m.spearman_defined) continue;
        auto key = std::make_pair(m.source, m.group);
        auto it = best.find(key);
        if (it == best.end() || m.spearman_value > it->second->spearman_value ||
            (m.spearman_value == it->second->spearman_value && m.params < it->second->params))
            best[key] = &m;
    }
    std::vector<RankingMetrics> extra;
    for (const auto& [key, m] : best) {
        RankingMetrics b = *m;
        b.statistic = "soft_opc_best";
        extra.push_back(std::move(b));
    }
    out.insert(out.end(), extra.begin(), extra.end());
    return out;
}

}  // namespace ohs
