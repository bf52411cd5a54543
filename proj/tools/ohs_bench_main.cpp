// ohs-bench: offline hyperparameter selection benchmark pipeline.
//
//   ohs-bench <stage> --config <path> [--only <axis=value,...>] [--out <dir>]
//             [--workers N] [--seed S]
//
// Stages: gen-data, train, ground-truth, fqe, stats, report, run (all).
// Exit codes: 0 success, 1 config error, 2 partial job failures.
// Environment overrides: OHS_BENCH_OUT_DIR, OHS_BENCH_WORKERS.

#include <cstdio>
#include <cstdlib>
#include <string>

#include <CLI11.hpp>

#include "ohs/errors.hpp"
#include "ohs/pipeline.hpp"

int main(int argc, char** argv) {
    CLI::App app{"offline hyperparameter selection benchmark"};
    app.require_subcommand(1);

    std::string config_path;
    std::string only_text;
    std::string out_dir;
    int workers = -1;
    long long seed = -1;

    const std::vector<std::string> stages = {"gen-data", "train", "ground-truth", "fqe",
                                             "stats",    "report", "run"};
    for (const auto& stage : stages) {
        auto* sub = app.add_subcommand(stage);
        sub->add_option("--config", config_path, "pipeline config (JSON)")->required();
        sub->add_option("--only", only_text, "grid filter, e.g. algorithm=BC,hidden_size=64");
        sub->add_option("--out", out_dir, "output directory override");
        sub->add_option("--workers", workers, "worker count override");
        sub->add_option("--seed", seed, "master seed override");
    }

    CLI11_PARSE(app, argc, argv);
    const std::string stage = app.get_subcommands().front()->get_name();

    try {
        ohs::PipelineConfig config = ohs::PipelineConfig::load(config_path);

        if (const char* env_out = std::getenv("OHS_BENCH_OUT_DIR"); env_out && *env_out)
            config.output_dir = env_out;
        if (const char* env_workers = std::getenv("OHS_BENCH_WORKERS");
            env_workers && *env_workers)
            config.workers = std::atoi(env_workers);
        if (!out_dir.empty()) config.output_dir = out_dir;
        if (workers >= 0) config.workers = workers;
        if (seed >= 0) config.master_seed = static_cast<std::uint64_t>(seed);

        ohs::OnlyFilter only = ohs::OnlyFilter::parse(only_text);
        ohs::Pipeline pipeline(std::move(config));
        const int failures = pipeline.run_stage(stage, only);

        for (const auto& job : pipeline.jobs())
            std::printf("[%s] %-40s %-8s %s (%.2fs)\n", job.stage.c_str(), job.id.c_str(),
                        job.status.c_str(), job.message.c_str(), job.seconds);
        if (failures > 0) {
            std::fprintf(stderr, "ohs-bench: %d job(s) failed\n", failures);
            return 2;
        }
        return 0;
    } catch (const ohs::ConfigError& e) {
        std::fprintf(stderr, "ohs-bench: config error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "ohs-bench: error: %s\n", e.what());
        return 1;
    }
}
