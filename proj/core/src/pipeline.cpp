#include "ohs/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <thread>

#include <json.hpp>

#include "ohs/errors.hpp"
#include "ohs/io.hpp"
#include "ohs/metrics.hpp"
#include "ohs/report.hpp"
#include "ohs/rng.hpp"
#include "ohs/stats.hpp"

namespace ohs {

using nlohmann::json;

namespace {

std::string format_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

// training-run coordinate: the cell without its learner_steps axis
std::string run_coord(const HyperparameterSetting& s) {
    std::string out = to_string(s.algorithm) + "_h" + std::to_string(s.hidden_size) + "_b" +
                      std::to_string(s.num_blocks) + "_lr" + format_g(s.learning_rate);
    if (s.beta) out += "_beta" + format_g(*s.beta);
    return out;
}

std::string hash_hex(const std::string& s) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(s)));
    return buf;
}

void check_known_keys(const json& obj, const std::set<std::string>& allowed,
                      const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.count(it.key()))
            throw ConfigError("unknown key '" + it.key() + "' in " + where);
    }
}

template <typename T>
void maybe_get(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

struct StopWatch {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

// config view used for input hashing: execution details (output dir, worker
// count) must not invalidate stamps
std::string semantic_config_json(const PipelineConfig& cfg) {
    json j = json::parse(cfg.canonical_json());
    j.erase("output_dir");
    j.erase("workers");
    return j.dump();
}

}  // namespace

// --- grid ---

void GridSpec::validate() const {
    if (algorithms.empty() || hidden_sizes.empty() || num_blocks.empty() ||
        learning_rates.empty() || learner_steps.empty())
        throw ConfigError("grid: every axis needs at least one value");
    const bool has_crr =
        std::find(algorithms.begin(), algorithms.end(), Algorithm::CRR) != algorithms.end();
    if (has_crr && crr_betas.empty())
        throw ConfigError("grid: crr_betas must be non-empty when CRR is in the grid");
    for (auto h : hidden_sizes)
        if (h < 1) throw ConfigError("grid: hidden_sizes must be positive");
    for (auto b : num_blocks)
        if (b < 0) throw ConfigError("grid: num_blocks must be non-negative");
    for (auto lr : learning_rates)
        if (!(lr > 0)) throw ConfigError("grid: learning_rates must be positive");
    for (auto s : learner_steps)
        if (s < 0) throw ConfigError("grid: learner_steps must be non-negative");
    for (auto b : crr_betas)
        if (!(b > 0)) throw ConfigError("grid: crr_betas must be positive");
}

std::vector<HyperparameterSetting> GridSpec::cells() const {
    std::vector<HyperparameterSetting> out;
    for (Algorithm algo : algorithms) {
        const std::vector<double> betas =
            algo == Algorithm::CRR ? crr_betas : std::vector<double>{0.0};
        for (int h : hidden_sizes)
            for (int b : num_blocks)
                for (double lr : learning_rates)
                    for (double beta : betas)
                        for (std::int64_t steps : learner_steps) {
                            HyperparameterSetting s;
                            s.algorithm = algo;
                            s.hidden_size = h;
                            s.num_blocks = b;
                            s.learning_rate = lr;
                            s.learner_steps = steps;
                            if (algo == Algorithm::CRR) s.beta = beta;
                            out.push_back(s);
                        }
    }
    return out;
}

// --- only filter ---

OnlyFilter OnlyFilter::parse(const std::string& text) {
    OnlyFilter f;
    std::string cur;
    auto flush = [&] {
        if (cur.empty()) return;
        auto eq = cur.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == cur.size())
            throw ConfigError("--only clause '" + cur + "' is not axis=value");
        f.clauses.emplace_back(cur.substr(0, eq), cur.substr(eq + 1));
        cur.clear();
    };
    for (char c : text) {
        if (c == ',') {
            flush();
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            cur.push_back(c);
        }
    }
    flush();
    static const std::set<std::string> axes{"algorithm",     "hidden_size", "num_blocks",
                                            "learning_rate", "learner_steps", "beta"};
    for (const auto& [axis, value] : f.clauses) {
        if (!axes.count(axis)) throw ConfigError("--only: unknown axis '" + axis + "'");
        (void)value;
    }
    return f;
}

bool OnlyFilter::matches(const HyperparameterSetting& s) const {
    for (const auto& [axis, value] : clauses) {
        if (axis == "algorithm") {
            if (algorithm_from_string(value) != s.algorithm) return false;
        } else if (axis == "hidden_size") {
            if (std::stoi(value) != s.hidden_size) return false;
        } else if (axis == "num_blocks") {
            if (std::stoi(value) != s.num_blocks) return false;
        } else if (axis == "learning_rate") {
            if (std::stod(value) != s.learning_rate) return false;
        } else if (axis == "learner_steps") {
            if (std::stoll(value) != s.learner_steps) return false;
        } else if (axis == "beta") {
            if (!s.beta || std::stod(value) != *s.beta) return false;
        }
    }
    return true;
}

// --- config ---

void PipelineConfig::validate() const {
    make_env(env);  // throws on unknown name
    if (dataset_episodes < 1) throw ConfigError("dataset.episodes must be >= 1");
    if (epsilon_schedule.empty()) throw ConfigError("dataset.epsilon_schedule must be non-empty");
    for (double e : epsilon_schedule)
        if (e < 0.0 || e > 1.0) throw ConfigError("epsilon values must be in [0, 1]");
    grid.validate();
    trainer.validate();
    FqeConfig fqe_check = fqe;
    fqe_check.gamma = trainer.gamma;
    fqe_check.validate();
    if (!std::is_sorted(fqe_checkpoints.begin(), fqe_checkpoints.end()))
        throw ConfigError("fqe.checkpoints must be ascending");
    static const std::set<std::string> kinds{"v_s0", "soft_opc", "avg_q", "td_err"};
    if (statistics.empty()) throw ConfigError("statistics must be non-empty");
    for (const auto& s : statistics)
        if (!kinds.count(s)) throw ConfigError("unknown statistic '" + s + "'");
    const auto n_cells = grid.cell_count();
    if (ks.empty()) throw ConfigError("ks must be non-empty");
    for (int k : ks) {
        if (k < 1) throw ConfigError("ks must be positive");
        if (static_cast<std::size_t>(k) > n_cells)
            throw ConfigError("k=" + std::to_string(k) + " exceeds the grid size " +
                              std::to_string(n_cells));
    }
    if (ground_truth_episodes < 1) throw ConfigError("ground_truth_episodes must be >= 1");
    if (n_atoms < 2) throw ConfigError("n_atoms must be >= 2");
    if (workers < 0) throw ConfigError("workers must be >= 0");
    if (output_dir.empty()) throw ConfigError("output_dir must be set");
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config '" + path.string() + "'");
    json j;
    try {
        is >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("config parse error: " + std::string(e.what()));
    }

    check_known_keys(j, {"env", "dataset", "grid", "trainer", "fqe", "statistics",
                         "soft_opc_thresholds", "ks", "ground_truth_episodes", "n_atoms",
                         "master_seed", "output_dir", "workers"},
                     "config");
    PipelineConfig c;
    maybe_get(j, "env", c.env);
    if (j.contains("dataset")) {
        const json& d = j.at("dataset");
        check_known_keys(d, {"episodes", "epsilon_schedule"}, "dataset");
        maybe_get(d, "episodes", c.dataset_episodes);
        maybe_get(d, "epsilon_schedule", c.epsilon_schedule);
    }
    if (j.contains("grid")) {
        const json& g = j.at("grid");
        check_known_keys(g, {"algorithms", "hidden_sizes", "num_blocks", "learning_rates",
                             "learner_steps", "crr_betas"},
                         "grid");
        if (g.contains("algorithms")) {
            c.grid.algorithms.clear();
            for (const auto& a : g.at("algorithms"))
                c.grid.algorithms.push_back(algorithm_from_string(a.get<std::string>()));
        }
        maybe_get(g, "hidden_sizes", c.grid.hidden_sizes);
        maybe_get(g, "num_blocks", c.grid.num_blocks);
        maybe_get(g, "learning_rates", c.grid.learning_rates);
        maybe_get(g, "learner_steps", c.grid.learner_steps);
        maybe_get(g, "crr_betas", c.grid.crr_betas);
    }
    if (j.contains("trainer")) {
        const json& t = j.at("trainer");
        check_known_keys(t, {"gamma", "batch_size", "target_update_period",
                             "crr_advantage_samples", "crr_weight_cap"},
                         "trainer");
        maybe_get(t, "gamma", c.trainer.gamma);
        maybe_get(t, "batch_size", c.trainer.batch_size);
        maybe_get(t, "target_update_period", c.trainer.target_update_period);
        maybe_get(t, "crr_advantage_samples", c.trainer.crr_advantage_samples);
        maybe_get(t, "crr_weight_cap", c.trainer.crr_weight_cap);
    }
    if (j.contains("fqe")) {
        const json& f = j.at("fqe");
        check_known_keys(f, {"hidden_size", "num_blocks", "learning_rate", "learner_steps",
                             "target_update_period", "distributional", "batch_size",
                             "checkpoints"},
                         "fqe");
        maybe_get(f, "hidden_size", c.fqe.hidden_size);
        maybe_get(f, "num_blocks", c.fqe.num_blocks);
        maybe_get(f, "learning_rate", c.fqe.learning_rate);
        maybe_get(f, "learner_steps", c.fqe.learner_steps);
        maybe_get(f, "target_update_period", c.fqe.target_update_period);
        maybe_get(f, "distributional", c.fqe.distributional);
        maybe_get(f, "batch_size", c.fqe.batch_size);
        maybe_get(f, "checkpoints", c.fqe_checkpoints);
    }
    maybe_get(j, "statistics", c.statistics);
    maybe_get(j, "soft_opc_thresholds", c.soft_opc_thresholds);
    maybe_get(j, "ks", c.ks);
    maybe_get(j, "ground_truth_episodes", c.ground_truth_episodes);
    maybe_get(j, "n_atoms", c.n_atoms);
    maybe_get(j, "master_seed", c.master_seed);
    maybe_get(j, "output_dir", c.output_dir);
    maybe_get(j, "workers", c.workers);
    return c;
}

std::string PipelineConfig::canonical_json() const {
    json grid_j{{"algorithms", json::array()},
                {"hidden_sizes", grid.hidden_sizes},
                {"num_blocks", grid.num_blocks},
                {"learning_rates", grid.learning_rates},
                {"learner_steps", grid.learner_steps},
                {"crr_betas", grid.crr_betas}};
    for (Algorithm a : grid.algorithms) grid_j["algorithms"].push_back(to_string(a));
    json j{{"env", env},
           {"dataset", {{"episodes", dataset_episodes}, {"epsilon_schedule", epsilon_schedule}}},
           {"grid", grid_j},
           {"trainer",
            {{"gamma", trainer.gamma},
             {"batch_size", trainer.batch_size},
             {"target_update_period", trainer.target_update_period},
             {"crr_advantage_samples", trainer.crr_advantage_samples},
             {"crr_weight_cap", trainer.crr_weight_cap}}},
           {"fqe",
            {{"hidden_size", fqe.hidden_size},
             {"num_blocks", fqe.num_blocks},
             {"learning_rate", fqe.learning_rate},
             {"learner_steps", fqe.learner_steps},
             {"target_update_period", fqe.target_update_period},
             {"distributional", fqe.distributional},
             {"batch_size", fqe.batch_size},
             {"checkpoints", fqe_checkpoints}}},
           {"statistics", statistics},
           {"soft_opc_thresholds", soft_opc_thresholds},
           {"ks", ks},
           {"ground_truth_episodes", ground_truth_episodes},
           {"n_atoms", n_atoms},
           {"master_seed", master_seed},
           {"output_dir", output_dir},
           {"workers", workers}};
    return j.dump();
}

// --- pipeline ---

Pipeline::Pipeline(PipelineConfig config) : cfg_(std::move(config)) {
    cfg_.validate();
    out_ = cfg_.output_dir;
    std::filesystem::create_directories(out_);
    std::filesystem::create_directories(out_ / "stamps");
}

std::vector<std::string> Pipeline::policy_ids(const OnlyFilter& only) const {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& cell : cfg_.grid.cells()) {
        if (!only.matches(cell)) continue;
        std::string id = cell.policy_id();
        if (seen.insert(id).second) out.push_back(std::move(id));
    }
    return out;
}

namespace {

// worker pool: job i writes slot i; merge order is input order
std::vector<JobStatus> run_parallel(int workers,
                                    const std::vector<std::function<JobStatus()>>& jobs) {
    std::vector<JobStatus> results(jobs.size());
    if (jobs.empty()) return results;
    int n = workers > 0 ? workers : static_cast<int>(std::thread::hardware_concurrency());
    n = std::max(1, std::min<int>(n, static_cast<int>(jobs.size())));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            results[i] = jobs[i]();
        }
    };
    if (n == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(static_cast<std::size_t>(n));
        for (int t = 0; t < n; ++t) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    return results;
}

bool stamp_matches(const std::filesystem::path& stamp_path, const std::string& hash) {
    std::ifstream is(stamp_path);
    if (!is) return false;
    json j;
    try {
        is >> j;
    } catch (...) {
        return false;
    }
    return j.value("input_hash", "") == hash;
}

void write_stamp(const std::filesystem::path& stamp_path, const std::string& hash) {
    std::filesystem::create_directories(stamp_path.parent_path());
    std::ofstream os(stamp_path, std::ios::trunc);
    os << json{{"input_hash", hash}}.dump() << "\n";
}

JobStatus run_one(const std::string& stage, const std::string& id,
                  const std::function<std::string()>& body) {
    StopWatch watch;
    JobStatus st;
    st.stage = stage;
    st.id = id;
    try {
        st.message = body();
        st.status = st.message == "skipped" ? "skipped" : "ok";
        if (st.status == "skipped") st.message = "input hash unchanged";
    } catch (const std::exception& e) {
        st.status = "failed";
        st.message = e.what();
    }
    st.seconds = watch.seconds();
    return st;
}

int count_failures(const std::vector<JobStatus>& sts) {
    int n = 0;
    for (const auto& s : sts)
        if (s.status == "failed") ++n;
    return n;
}

}  // namespace

int Pipeline::gen_data() {
    const std::string hash = hash_hex(
        json{{"env", cfg_.env},
             {"episodes", cfg_.dataset_episodes},
             {"epsilon_schedule", cfg_.epsilon_schedule},
             {"master_seed", cfg_.master_seed},
             {"format_version", kDatasetFormatVersion}}
            .dump());
    auto job = [&]() -> std::string {
        const auto stamp = out_ / "stamps" / "gen-data.json";
        if (stamp_matches(stamp, hash) && std::filesystem::exists(out_ / "dataset.ohsd"))
            return "skipped";
        auto env = make_env(cfg_.env);
        BehaviorSpec behavior{cfg_.epsilon_schedule};
        Dataset ds = generate_dataset(*env, behavior, cfg_.dataset_episodes,
                                      derive_seed(cfg_.master_seed, "gen-data"));
        ds.validate();
        save_dataset(out_ / "dataset.ohsd", ds);
        write_stamp(stamp, hash);
        char msg[64];
        std::snprintf(msg, sizeof(msg), "%zu episodes, %zu transitions", ds.episodes.size(),
                      ds.n_transitions());
        return msg;
    };
    jobs_.push_back(run_one("gen-data", "dataset", job));
    write_manifest();
    return count_failures({jobs_.back()});
}

namespace {

struct TrainRun {
    HyperparameterSetting base;  // learner_steps ignored
    std::vector<std::int64_t> steps;
};

}  // namespace

int Pipeline::train_stage(const OnlyFilter& only) {
    if (!std::filesystem::exists(out_ / "dataset.ohsd"))
        throw StageDependencyError("train", "gen-data");
    auto env = make_env(cfg_.env);
    const Dataset dataset = load_dataset(out_ / "dataset.ohsd", env->spec());
    const AtomGrid grid = default_atom_grid(*env, gamma(), cfg_.n_atoms);

    // group filtered cells into one training run per non-steps coordinate
    std::map<std::string, TrainRun> runs;
    for (const auto& cell : cfg_.grid.cells()) {
        if (!only.matches(cell)) continue;
        auto& run = runs[run_coord(cell)];
        run.base = cell;
        run.steps.push_back(cell.learner_steps);
    }

    const std::string gen_hash =
        hash_hex(json{{"seed", cfg_.master_seed}, {"episodes", cfg_.dataset_episodes}}.dump());
    std::vector<std::function<JobStatus()>> jobs;
    for (const auto& [coord, run] : runs) {
        jobs.push_back([this, coord = coord, run = run, &dataset, &grid, &gen_hash] {
            return run_one("train", coord, [&]() -> std::string {
                std::vector<std::int64_t> steps = run.steps;
                std::sort(steps.begin(), steps.end());
                steps.erase(std::unique(steps.begin(), steps.end()), steps.end());

                const std::string hash = hash_hex(
                    json{{"gen", gen_hash},
                         {"coord", coord},
                         {"steps", steps},
                         {"config", semantic_config_json(cfg_)}}
                        .dump());
                const auto stamp = out_ / "stamps" / "train" / (coord + ".json");
                bool all_outputs = true;
                HyperparameterSetting probe = run.base;
                for (auto s : steps) {
                    probe.learner_steps = s;
                    if (!std::filesystem::exists(out_ / "artifacts" / probe.policy_id() /
                                                 "manifest.json"))
                        all_outputs = false;
                }
                if (stamp_matches(stamp, hash) && all_outputs) return "skipped";

                HyperparameterSetting setting = run.base;
                setting.seed = derive_seed(cfg_.master_seed, "train|" + coord);
                auto artifacts = train_with_snapshots(dataset, setting, steps, cfg_.trainer, grid);
                int failed = 0;
                for (const auto& a : artifacts) {
                    save_artifact(out_ / "artifacts" / a.policy_id, a, cfg_.env);
                    if (a.failed) ++failed;
                }
                write_stamp(stamp, hash);
                if (failed)
                    return std::to_string(artifacts.size()) + " snapshots, " +
                           std::to_string(failed) + " diverged";
                return std::to_string(artifacts.size()) + " snapshots";
            });
        });
    }
    auto sts = run_parallel(cfg_.workers, jobs);
    jobs_.insert(jobs_.end(), sts.begin(), sts.end());
    write_manifest();
    return count_failures(sts);
}

int Pipeline::ground_truth_stage(const OnlyFilter& only) {
    if (!std::filesystem::exists(out_ / "artifacts"))
        throw StageDependencyError("ground-truth", "train");

    std::vector<std::function<JobStatus()>> jobs;
    for (const std::string& id : policy_ids(only)) {
        jobs.push_back([this, id] {
            return run_one("ground-truth", id, [&]() -> std::string {
                const auto art_dir = out_ / "artifacts" / id;
                if (!std::filesystem::exists(art_dir / "manifest.json"))
                    throw StageDependencyError("ground-truth", "train");
                const std::string hash = hash_hex(json{{"id", id},
                                                       {"episodes", cfg_.ground_truth_episodes},
                                                       {"gamma", gamma()},
                                                       {"master_seed", cfg_.master_seed}}
                                                      .dump());
                const auto stamp = out_ / "stamps" / "ground-truth" / (id + ".json");
                const auto out_path = out_ / "ground_truth" / (id + ".csv");
                if (stamp_matches(stamp, hash) && std::filesystem::exists(out_path))
                    return "skipped";
                StoredArtifact stored = load_artifact(art_dir);
                if (stored.artifact.failed) return "diverged artifact, no rollout";
                auto env = make_env(stored.env_name);
                MlpPolicy policy = stored.artifact.make_policy(env->spec());
                ActualValue v = actual_value(*env, policy, cfg_.ground_truth_episodes, gamma(),
                                             derive_seed(cfg_.master_seed, "gt|" + id));
                std::filesystem::create_directories(out_ / "ground_truth");
                write_ground_truth_csv(out_path, {{id, v.mean, v.stderr_, v.n_episodes}});
                write_stamp(stamp, hash);
                return "actual_value " + format_number(v.mean);
            });
        });
    }
    auto sts = run_parallel(cfg_.workers, jobs);
    jobs_.insert(jobs_.end(), sts.begin(), sts.end());
    write_manifest();
    return count_failures(sts);
}

int Pipeline::fqe_stage(const OnlyFilter& only) {
    if (!std::filesystem::exists(out_ / "dataset.ohsd"))
        throw StageDependencyError("fqe", "gen-data");
    if (!std::filesystem::exists(out_ / "artifacts")) throw StageDependencyError("fqe", "train");
    auto env = make_env(cfg_.env);
    const Dataset dataset = load_dataset(out_ / "dataset.ohsd", env->spec());
    const AtomGrid grid = default_atom_grid(*env, gamma(), cfg_.n_atoms);

    std::vector<std::function<JobStatus()>> jobs;
    for (const std::string& id : policy_ids(only)) {
        jobs.push_back([this, id, &dataset, &grid] {
            return run_one("fqe", id, [&]() -> std::string {
                const auto art_dir = out_ / "artifacts" / id;
                if (!std::filesystem::exists(art_dir / "manifest.json"))
                    throw StageDependencyError("fqe", "train");

                FqeConfig config = cfg_.fqe;
                config.gamma = gamma();
                config.seed = derive_seed(cfg_.master_seed, "fqe|" + id);

                const std::string hash =
                    hash_hex(json{{"id", id},
                                  {"config", semantic_config_json(cfg_)},
                                  {"seed", config.seed}}
                                 .dump());
                const auto stamp = out_ / "stamps" / "fqe" / (id + ".json");
                const auto dir = out_ / "fqe" / id;
                if (stamp_matches(stamp, hash) && std::filesystem::exists(dir / "manifest.json"))
                    return "skipped";

                StoredArtifact stored = load_artifact(art_dir);
                if (stored.artifact.failed) return "diverged artifact, no re-evaluation";
                MlpPolicy policy = stored.artifact.make_policy(dataset.env_spec);

                if (cfg_.fqe_checkpoints.empty()) {
                    FqeCritic critic = fqe(dataset, policy, config, grid, id);
                    save_fqe_critic(dir, critic);
                    write_stamp(stamp, hash);
                    return critic.failed ? "diverged" : "ok";
                }
                std::vector<std::int64_t> checkpoints = cfg_.fqe_checkpoints;
                auto critics = fqe_step_sweep(dataset, policy, config, grid, checkpoints, id);
                // the last checkpoint doubles as the final critic
                save_fqe_critic(dir, critics.back());
                for (const auto& c : critics)
                    save_weights(dir / ("critic_step" + std::to_string(c.config.learner_steps) +
                                        ".ohsw"),
                                 c.critic_params);
                write_stamp(stamp, hash);
                return std::to_string(critics.size()) + " checkpoints";
            });
        });
    }
    auto sts = run_parallel(cfg_.workers, jobs);
    jobs_.insert(jobs_.end(), sts.begin(), sts.end());
    write_manifest();
    return count_failures(sts);
}

namespace {

struct StatsJobResult {
    std::vector<StatisticValue> rows;
    std::vector<std::pair<std::int64_t, StatisticValue>> checkpoint_rows;
};

}  // namespace

int Pipeline::stats_stage() {
    if (!std::filesystem::exists(out_ / "dataset.ohsd"))
        throw StageDependencyError("stats", "gen-data");
    if (!std::filesystem::exists(out_ / "artifacts")) throw StageDependencyError("stats", "train");
    auto env = make_env(cfg_.env);
    const Dataset dataset = load_dataset(out_ / "dataset.ohsd", env->spec());

    const std::string hash = hash_hex(json{{"config", semantic_config_json(cfg_)}}.dump());
    const auto stamp = out_ / "stamps" / "stats.json";
    if (stamp_matches(stamp, hash) && std::filesystem::exists(out_ / "stats.csv")) {
        jobs_.push_back({"stats", "stats", "skipped", "input hash unchanged", 0.0});
        write_manifest();
        return 0;
    }

    const std::vector<double> thresholds = cfg_.soft_opc_thresholds.empty()
                                               ? default_soft_opc_thresholds(dataset, gamma())
                                               : cfg_.soft_opc_thresholds;

    auto compute_stats = [&](const std::string& id, const std::string& algorithm,
                             const std::string& source, const ValueCritic& critic,
                             const Policy& policy) {
        std::vector<StatisticValue> rows;
        for (const std::string& kind : cfg_.statistics) {
            if (kind == "soft_opc") {
                for (double th : thresholds) {
                    StatisticValue s{id, algorithm, source, kind, th, 0.0};
                    try {
                        s.value = soft_opc(critic, dataset, gamma(), th);
                    } catch (const UndefinedStatistic&) {
                        s.value = std::numeric_limits<double>::quiet_NaN();
                    }
                    rows.push_back(std::move(s));
                }
                continue;
            }
            StatisticValue s{id, algorithm, source, kind, std::nullopt, 0.0};
            if (kind == "v_s0") s.value = v_s0(critic, policy, dataset);
            else if (kind == "avg_q") s.value = avg_q(critic, policy, dataset);
            else if (kind == "td_err") s.value = td_err(critic, policy, dataset, gamma());
            rows.push_back(std::move(s));
        }
        return rows;
    };

    const auto ids = policy_ids();
    std::vector<std::function<JobStatus()>> jobs;
    std::vector<StatsJobResult> results(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        jobs.push_back([this, i, &ids, &results, &dataset, &compute_stats] {
            const std::string& id = ids[i];
            return run_one("stats", id, [&]() -> std::string {
                const auto art_dir = out_ / "artifacts" / id;
                if (!std::filesystem::exists(art_dir / "manifest.json"))
                    throw StageDependencyError("stats", "train");
                StoredArtifact stored = load_artifact(art_dir);
                if (stored.artifact.failed) return "diverged artifact, no statistics";
                MlpPolicy policy = stored.artifact.make_policy(dataset.env_spec);
                const std::string algorithm = to_string(stored.artifact.setting.algorithm);

                ValueCritic orl{stored.artifact.orl_critic_params, stored.artifact.grid};
                auto orl_rows = compute_stats(id, algorithm, "ORL", orl, policy);
                results[i].rows.insert(results[i].rows.end(), orl_rows.begin(), orl_rows.end());

                const auto fqe_dir = out_ / "fqe" / id;
                if (std::filesystem::exists(fqe_dir / "manifest.json")) {
                    FqeCritic fc = load_fqe_critic(fqe_dir);
                    if (!fc.failed) {
                        ValueCritic ope{fc.critic_params, fc.grid};
                        auto ope_rows = compute_stats(id, algorithm, "OPE", ope, policy);
                        results[i].rows.insert(results[i].rows.end(), ope_rows.begin(),
                                               ope_rows.end());
                        for (std::int64_t cp : cfg_.fqe_checkpoints) {
                            FqeCritic snap = load_fqe_checkpoint(fqe_dir, cp);
                            ValueCritic vc{snap.critic_params, snap.grid};
                            StatisticValue s{id, algorithm, "OPE", "v_s0", std::nullopt,
                                             v_s0(vc, policy, dataset)};
                            results[i].checkpoint_rows.emplace_back(cp, std::move(s));
                        }
                    }
                }
                return std::to_string(results[i].rows.size()) + " statistics";
            });
        });
    }
    auto sts = run_parallel(cfg_.workers, jobs);
    jobs_.insert(jobs_.end(), sts.begin(), sts.end());

    std::vector<StatisticValue> all_rows;
    std::vector<std::pair<std::int64_t, StatisticValue>> all_checkpoint_rows;
    for (const auto& r : results) {
        all_rows.insert(all_rows.end(), r.rows.begin(), r.rows.end());
        all_checkpoint_rows.insert(all_checkpoint_rows.end(), r.checkpoint_rows.begin(),
                                   r.checkpoint_rows.end());
    }
    write_stats_csv(out_ / "stats.csv", all_rows);
    if (!cfg_.fqe_checkpoints.empty()) {
        std::vector<StatisticValue> rows;
        for (auto& [cp, s] : all_checkpoint_rows) {
            StatisticValue r = s;
            r.params = static_cast<double>(cp);
            rows.push_back(std::move(r));
        }
        write_stats_csv(out_ / "stats_checkpoints.csv", rows);
    }
    write_stamp(stamp, hash);
    write_manifest();
    return count_failures(sts);
}

int Pipeline::report_stage() {
    if (!std::filesystem::exists(out_ / "stats.csv")) throw StageDependencyError("report", "stats");
    if (!std::filesystem::exists(out_ / "ground_truth"))
        throw StageDependencyError("report", "ground-truth");

    const std::string hash = hash_hex(json{{"config", semantic_config_json(cfg_)}}.dump());
    const auto stamp = out_ / "stamps" / "report.json";
    const auto reports = out_ / "reports";
    if (stamp_matches(stamp, hash) && std::filesystem::exists(reports / "metrics.csv")) {
        jobs_.push_back({"report", "report", "skipped", "input hash unchanged", 0.0});
        write_manifest();
        return 0;
    }

    JobStatus st = run_one("report", "report", [&]() -> std::string {
        std::vector<StatisticValue> stats = read_stats_csv(out_ / "stats.csv");
        std::map<std::string, double> actuals;
        for (const std::string& id : policy_ids()) {
            const auto p = out_ / "ground_truth" / (id + ".csv");
            if (!std::filesystem::exists(p)) continue;
            for (const auto& e : read_ground_truth_csv(p)) actuals[e.policy_id] = e.mean;
        }
        if (actuals.empty()) throw StageDependencyError("report", "ground-truth");

        std::filesystem::create_directories(reports);
        write_statistics_csv(reports / "statistics.csv", stats, actuals);
        auto metrics = rank_report(stats, actuals, cfg_.ks);
        write_metrics_csv(reports / "metrics.csv", metrics, cfg_.ks);
        write_scatter_csv(reports / "scatter.csv", stats, actuals);

        if (!cfg_.fqe_checkpoints.empty() &&
            std::filesystem::exists(out_ / "stats_checkpoints.csv")) {
            auto cp_rows = read_stats_csv(out_ / "stats_checkpoints.csv");
            std::vector<FqeStepPoint> points;
            for (std::int64_t cp : cfg_.fqe_checkpoints) {
                // group rows of this checkpoint by algorithm and overall
                std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> groups;
                for (const auto& r : cp_rows) {
                    if (static_cast<std::int64_t>(r.params.value_or(-1)) != cp) continue;
                    auto it = actuals.find(r.policy_id);
                    if (it == actuals.end() || std::isnan(r.value)) continue;
                    for (const std::string& g : {r.algorithm, std::string("all")}) {
                        groups[g].first.push_back(r.value);
                        groups[g].second.push_back(it->second);
                    }
                }
                for (const auto& [g, data] : groups) {
                    FqeStepPoint p;
                    p.checkpoint = cp;
                    p.group = g;
                    try {
                        p.spearman_value = spearman(data.first, data.second);
                        p.spearman_defined = true;
                    } catch (const UndefinedStatistic&) {
                        p.spearman_value = std::numeric_limits<double>::quiet_NaN();
                    }
                    points.push_back(std::move(p));
                }
            }
            write_fqe_steps_csv(reports / "fqe_steps.csv", points);
        }
        write_stamp(stamp, hash);
        return std::to_string(metrics.size()) + " metric rows";
    });
    jobs_.push_back(st);
    write_manifest();
    return count_failures({st});
}

int Pipeline::run_all(const OnlyFilter& only) {
    int failures = 0;
    failures += gen_data();
    failures += train_stage(only);
    failures += ground_truth_stage(only);
    failures += fqe_stage(only);
    failures += stats_stage();
    failures += report_stage();
    return failures;
}

int Pipeline::run_stage(const std::string& stage_name, const OnlyFilter& only) {
    if (stage_name == "gen-data") return gen_data();
    if (stage_name == "train") return train_stage(only);
    if (stage_name == "ground-truth") return ground_truth_stage(only);
    if (stage_name == "fqe") return fqe_stage(only);
    if (stage_name == "stats") return stats_stage();
    if (stage_name == "report") return report_stage();
    if (stage_name == "run") return run_all(only);
    throw ConfigError("unknown stage '" + stage_name + "'");
}

void Pipeline::write_manifest() const {
    json jobs = json::array();
    // merge with any previous invocation: one entry per (stage, id)
    std::map<std::pair<std::string, std::string>, json> merged;
    const auto path = out_ / "manifest.json";
    if (std::filesystem::exists(path)) {
        std::ifstream is(path);
        json prev;
        try {
            is >> prev;
            for (const auto& j : prev.value("jobs", json::array()))
                merged[{j.value("stage", ""), j.value("id", "")}] = j;
        } catch (...) {
        }
    }
    for (const auto& s : jobs_) {
        merged[{s.stage, s.id}] = json{{"stage", s.stage},
                                       {"id", s.id},
                                       {"status", s.status},
                                       {"message", s.message},
                                       {"seconds", s.seconds}};
    }
    for (const auto& [key, j] : merged) jobs.push_back(j);
    json manifest{{"format_version", 1},
                  {"config", json::parse(cfg_.canonical_json())},
                  {"jobs", jobs},
                  {"versions", {{"ohs", "0.1.0"}}}};
    std::ofstream os(path, std::ios::trunc);
    os << manifest.dump(2) << "\n";
}

}  // namespace ohs
