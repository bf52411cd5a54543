#include "ohs/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ohs/errors.hpp"

namespace ohs {

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
    os << kReportVersionLine << "\n";
    return os;
}

std::ifstream open_csv_in(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open '" + path.string() + "' for reading");
    return is;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

std::string params_str(const std::optional<double>& p) {
    return p ? format_number(*p) : std::string{};
}

// rows sorted by (policy_id, source, statistic, params) for byte determinism
std::vector<const StatisticValue*> sorted_rows(const std::vector<StatisticValue>& stats) {
    std::vector<const StatisticValue*> rows;
    rows.reserve(stats.size());
    for (const auto& s : stats) rows.push_back(&s);
    std::stable_sort(rows.begin(), rows.end(),
                     [](const StatisticValue* a, const StatisticValue* b) {
                         if (a->policy_id != b->policy_id) return a->policy_id < b->policy_id;
                         if (a->source != b->source) return a->source < b->source;
                         if (a->kind != b->kind) return a->kind < b->kind;
                         return a->params < b->params;
                     });
    return rows;
}

}  // namespace

void write_statistics_csv(const std::filesystem::path& path,
                          const std::vector<StatisticValue>& statistics,
                          const std::map<std::string, double>& actual_values) {
    auto os = open_csv(path);
    os << "policy_id,algorithm,source,statistic,params,value,actual_value,abs_error\n";
    for (const StatisticValue* s : sorted_rows(statistics)) {
        auto it = actual_values.find(s->policy_id);
        const bool has_actual = it != actual_values.end();
        os << s->policy_id << ',' << s->algorithm << ',' << s->source << ',' << s->kind << ','
           << params_str(s->params) << ',' << format_number(s->value) << ','
           << (has_actual ? format_number(it->second) : "nan") << ','
           << (has_actual ? format_number(abs_error(s->value, it->second)) : "nan") << '\n';
    }
}

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<RankingMetrics>& metrics, const std::vector<int>& ks) {
    auto os = open_csv(path);
    os << "statistic,source,group,params,n_policies,spearman";
    for (int k : ks) os << ",regret_at_" << k;
    for (int k : ks) os << ",norm_regret_at_" << k;
    os << ",mean_abs_error,median_regret_baseline\n";

    std::vector<const RankingMetrics*> rows;
    rows.reserve(metrics.size());
    for (const auto& m : metrics) rows.push_back(&m);
    std::stable_sort(rows.begin(), rows.end(),
                     [](const RankingMetrics* a, const RankingMetrics* b) {
                         if (a->statistic != b->statistic) return a->statistic < b->statistic;
                         if (a->source != b->source) return a->source < b->source;
                         if (a->group != b->group) return a->group < b->group;
                         return a->params < b->params;
                     });
    for (const RankingMetrics* m : rows) {
        os << m->statistic << ',' << m->source << ',' << m->group << ',' << params_str(m->params)
           << ',' << m->n_policies << ',' << format_number(m->spearman_value);
        for (int k : ks) os << ',' << format_number(m->regret.at(k));
        for (int k : ks) os << ',' << format_number(m->normalized_regret.at(k));
        os << ',' << format_number(m->mean_abs_error) << ','
           << format_number(m->median_regret_baseline) << '\n';
    }
}

void write_scatter_csv(const std::filesystem::path& path,
                       const std::vector<StatisticValue>& statistics,
                       const std::map<std::string, double>& actual_values) {
    auto os = open_csv(path);
    os << "policy_id,algorithm,source,estimate,actual\n";
    for (const StatisticValue* s : sorted_rows(statistics)) {
        if (s->kind != "v_s0") continue;
        auto it = actual_values.find(s->policy_id);
        if (it == actual_values.end()) continue;
        os << s->policy_id << ',' << s->algorithm << ',' << s->source << ','
           << format_number(s->value) << ',' << format_number(it->second) << '\n';
    }
}

void write_fqe_steps_csv(const std::filesystem::path& path,
                         const std::vector<FqeStepPoint>& points) {
    auto os = open_csv(path);
    os << "checkpoint,group,spearman\n";
    std::vector<const FqeStepPoint*> rows;
    for (const auto& p : points) rows.push_back(&p);
    std::stable_sort(rows.begin(), rows.end(), [](const FqeStepPoint* a, const FqeStepPoint* b) {
        if (a->checkpoint != b->checkpoint) return a->checkpoint < b->checkpoint;
        return a->group < b->group;
    });
    for (const FqeStepPoint* p : rows)
        os << p->checkpoint << ',' << p->group << ',' << format_number(p->spearman_value) << '\n';
}

void write_ground_truth_csv(const std::filesystem::path& path,
                            const std::vector<GroundTruthEntry>& entries) {
    auto os = open_csv(path);
    os << "policy_id,actual_value,stderr,n_episodes\n";
    std::vector<const GroundTruthEntry*> rows;
    for (const auto& e : entries) rows.push_back(&e);
    std::stable_sort(rows.begin(), rows.end(),
                     [](const GroundTruthEntry* a, const GroundTruthEntry* b) {
                         return a->policy_id < b->policy_id;
                     });
    for (const GroundTruthEntry* e : rows)
        os << e->policy_id << ',' << format_number(e->mean) << ',' << format_number(e->stderr_)
           << ',' << e->n_episodes << '\n';
}

std::vector<GroundTruthEntry> read_ground_truth_csv(const std::filesystem::path& path) {
    auto is = open_csv_in(path);
    std::string line;
    std::vector<GroundTruthEntry> out;
    bool header_seen = false;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true;
            continue;
        }
        auto f = split_csv_line(line);
        if (f.size() != 4) throw IoError("malformed ground-truth row: " + line);
        GroundTruthEntry e;
        e.policy_id = f[0];
        e.mean = std::stod(f[1]);
        e.stderr_ = std::stod(f[2]);
        e.n_episodes = std::stoi(f[3]);
        out.push_back(std::move(e));
    }
    return out;
}

void write_stats_csv(const std::filesystem::path& path,
                     const std::vector<StatisticValue>& statistics) {
    auto os = open_csv(path);
    os << "policy_id,algorithm,source,statistic,params,value\n";
    for (const StatisticValue* s : sorted_rows(statistics))
        os << s->policy_id << ',' << s->algorithm << ',' << s->source << ',' << s->kind << ','
           << params_str(s->params) << ',' << format_number(s->value) << '\n';
}

std::vector<StatisticValue> read_stats_csv(const std::filesystem::path& path) {
    auto is = open_csv_in(path);
    std::string line;
    std::vector<StatisticValue> out;
    bool header_seen = false;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true;
            continue;
        }
        auto f = split_csv_line(line);
        if (f.size() != 6) throw IoError("malformed stats row: " + line);
        StatisticValue s;
        s.policy_id = f[0];
        s.algorithm = f[1];
        s.source = f[2];
        s.kind = f[3];
        if (!f[4].empty()) s.params = std::stod(f[4]);
        s.value = std::stod(f[5]);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace ohs
