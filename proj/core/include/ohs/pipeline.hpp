#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ohs/fqe.hpp"
#include "ohs/train.hpp"

namespace ohs {

struct GridSpec {
    std::vector<Algorithm> algorithms{Algorithm::BC, Algorithm::CRR, Algorithm::D4PG};
    std::vector<int> hidden_sizes{64, 128};
    std::vector<int> num_blocks{1};
    std::vector<double> learning_rates{1e-3, 1e-4};
    std::vector<std::int64_t> learner_steps{2000, 6000};
    std::vector<double> crr_betas{0.1};

    void validate() const;
    // every grid cell, in canonical order; the beta axis applies to CRR only
    std::vector<HyperparameterSetting> cells() const;
    std::size_t cell_count() const { return cells().size(); }
};

// --only axis=value,... filter over grid cells
struct OnlyFilter {
    std::vector<std::pair<std::string, std::string>> clauses;

    static OnlyFilter parse(const std::string& text);
    bool empty() const { return clauses.empty(); }
    bool matches(const HyperparameterSetting& s) const;
};

struct PipelineConfig {
    std::string env = "chainwalk";
    int dataset_episodes = 200;
    std::vector<double> epsilon_schedule{0.0, 0.3, 0.7};
    GridSpec grid;
    TrainerConfig trainer;
    FqeConfig fqe;  // seed and gamma are derived (per job / from trainer)
    std::vector<std::int64_t> fqe_checkpoints;  // non-empty enables the step sweep
    std::vector<std::string> statistics{"v_s0", "soft_opc", "avg_q", "td_err"};
    std::vector<double> soft_opc_thresholds;  // empty: deciles of the return distribution
    std::vector<int> ks{1, 3, 5};
    int ground_truth_episodes = 100;
    int n_atoms = 51;
    std::uint64_t master_seed = 1;
    std::string output_dir = "out";
    int workers = 0;  // 0: hardware concurrency

    void validate() const;
    // Strict parse: unknown keys are rejected. Missing keys take defaults.
    static PipelineConfig load(const std::filesystem::path& path);
    std::string canonical_json() const;
};

struct JobStatus {
    std::string stage;
    std::string id;
    std::string status;  // "ok", "failed", "skipped"
    std::string message;
    double seconds = 0.0;
};

class Pipeline {
public:
    explicit Pipeline(PipelineConfig config);

    // Stage entry points; each returns the number of failed jobs. Stages are
    // idempotent: a completed job with an unchanged input hash is skipped.
    int gen_data();
    int train_stage(const OnlyFilter& only = {});
    int ground_truth_stage(const OnlyFilter& only = {});
    int fqe_stage(const OnlyFilter& only = {});
    int stats_stage();
    int report_stage();
    int run_all(const OnlyFilter& only = {});

    int run_stage(const std::string& stage_name, const OnlyFilter& only = {});

    const std::vector<JobStatus>& jobs() const { return jobs_; }
    const PipelineConfig& config() const { return cfg_; }
    std::filesystem::path out_dir() const { return out_; }

    // canonical names of the trained policies targeted by this config
    std::vector<std::string> policy_ids(const OnlyFilter& only = {}) const;

private:
    PipelineConfig cfg_;
    std::filesystem::path out_;
    std::vector<JobStatus> jobs_;
    double gamma() const { return cfg_.trainer.gamma; }
    void write_manifest() const;
};

}  // namespace ohs
