// ringkit command line: synthesize sessions, run experiments, re-render
// reports. Exit codes: 0 success, 2 configuration error, 3 data error.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ringkit/config.hpp"
#include "ringkit/runner.hpp"

namespace {

int resolve_jobs(std::optional<int> flag) {
    if (flag) return *flag;
    if (const char* env = std::getenv("RINGKIT_JOBS")) {
        try {
            return std::max(1, std::stoi(env));
        } catch (...) {
            throw ringkit::ConfigError("RINGKIT_JOBS is not a number");
        }
    }
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ringkit: ring PPG vital-sign estimation and evaluation"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs_flag;
    bool verbose = false;

    auto add_common = [&](CLI::App* cmd, bool config_required) {
        cmd->add_option("--config", config_path, "experiment config JSON")
            ->required(config_required);
        cmd->add_option("--out", out_dir, "output directory (overrides the config)");
        cmd->add_option("--seed", seed, "fold seed override");
        cmd->add_option("--jobs", jobs_flag, "worker threads (or RINGKIT_JOBS)");
        cmd->add_flag("--verbose", verbose, "progress notes on stderr");
    };

    CLI::App* synth = app.add_subcommand("synth", "generate synthetic sessions to disk");
    add_common(synth, true);

    CLI::App* run = app.add_subcommand("run", "run the configured experiment");
    add_common(run, true);

    CLI::App* report = app.add_subcommand("report", "re-render reports from a prior run");
    std::string run_dir;
    report->add_option("--run", run_dir, "directory of a prior run (pairs.csv, manifest.json)")
        ->required();
    report->add_option("--out", out_dir, "output directory (defaults to the run directory)");
    report->add_flag("--verbose", verbose, "progress notes on stderr");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (synth->parsed()) {
            const ringkit::ExperimentConfig cfg = ringkit::load_config(config_path);
            const auto dest = out_dir.empty() ? cfg.output_dir : std::filesystem::path(out_dir);
            const auto paths = ringkit::run_synth(cfg, dest);
            for (const auto& p : paths) {
                if (verbose) std::cerr << "ringkit: wrote " << p.string() << "\n";
            }
            std::cout << paths.size() << " session(s) written to " << dest.string() << "\n";
        } else if (run->parsed()) {
            const ringkit::ExperimentConfig cfg = ringkit::load_config(config_path);
            ringkit::RunOptions opt;
            opt.jobs = resolve_jobs(jobs_flag);
            opt.verbose = verbose;
            if (!out_dir.empty()) opt.out_override = out_dir;
            if (seed) opt.seed_override = seed;
            const ringkit::RunResult result = ringkit::run_experiment(cfg, opt);
            for (const ringkit::ReportRow& row : result.rows) {
                std::cout << row.task << "/" << row.method << " " << row.scenario
                          << ": n=" << row.report.n << " mae=" << row.report.mae
                          << " rmse=" << row.report.rmse << "\n";
            }
            std::cout << "reports in " << result.out_dir.string() << "\n";
        } else if (report->parsed()) {
            const auto dest = out_dir.empty() ? std::filesystem::path(run_dir)
                                              : std::filesystem::path(out_dir);
            ringkit::rerender_report(run_dir, dest);
            std::cout << "reports in " << dest.string() << "\n";
        }
    } catch (const ringkit::ConfigError& e) {
        std::cerr << "ringkit: config error: " << e.what() << "\n";
        return 2;
    } catch (const ringkit::Error& e) {
        std::cerr << "ringkit: error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "ringkit: error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
