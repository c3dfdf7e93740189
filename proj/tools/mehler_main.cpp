// Experiment runner: run / validate / emit-plot-data over YAML experiment files.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "mehler/cli/runner.hpp"

namespace {

constexpr int exit_config = 2;
constexpr int exit_numerical = 3;

std::optional<std::uint64_t> seed_flag(const CLI::Option* opt, std::uint64_t value) {
    return opt->count() ? std::optional<std::uint64_t>(value) : std::nullopt;
}

void print_result(const mehler::cli::ExperimentResult& r) {
    const char* tag = r.status == mehler::cli::Status::passed              ? "PASS"
                      : r.status == mehler::cli::Status::tolerance_failure ? "FAIL"
                                                                           : "ERROR";
    std::cout << "[" << tag << "] " << r.name << " (" << mehler::cli::to_string(r.kind) << ", " << r.seconds << " s)\n";
    for (const auto& c : r.checks)
        std::cout << "    " << (c.passed ? "ok  " : "FAIL") << " " << c.name << ": measured " << c.measured
                  << ", target " << c.target << " ± " << c.tolerance << "\n";
    if (!r.error.empty()) std::cout << "    error: " << r.error << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Generalized Mehler semigroup experiments"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed = 0;
    std::string out_dir;
    unsigned jobs = 0;

    auto* run = app.add_subcommand("run", "Run every experiment of a config and write a report");
    run->add_option("--config", config_path, "Experiment file (YAML)")->required();
    auto* run_seed = run->add_option("--seed", seed, "Override the config seed");
    auto* run_out = run->add_option("--out", out_dir, "Report directory (overrides the config)");
    auto* run_jobs = run->add_option("--jobs", jobs, "Worker threads (0 = all cores)");

    auto* validate = app.add_subcommand("validate", "Parse and range-check a config without running it");
    validate->add_option("--config", config_path, "Experiment file (YAML)")->required();
    auto* validate_seed = validate->add_option("--seed", seed, "Override the config seed");

    std::string report_dir;
    std::string selector = "all";
    auto* emit = app.add_subcommand("emit-plot-data", "Write the long-format plotting CSV of a report");
    emit->add_option("--report", report_dir, "Report directory written by run")->required();
    emit->add_option("--select", selector, "all, an experiment kind, or an experiment name");
    emit->add_option("--out", out_dir, "Output CSV (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : exit_config;
    }

    try {
        if (*emit) {
            if (out_dir.empty()) {
                mehler::cli::emit_plot_data(report_dir, selector, std::cout);
            } else {
                std::ofstream out(out_dir);
                if (!out) throw mehler::InvalidArgument("cannot write " + out_dir);
                mehler::cli::emit_plot_data(report_dir, selector, out);
            }
            return 0;
        }

        const bool running = static_cast<bool>(*run);
        auto config = mehler::cli::load_config(config_path, seed_flag(running ? run_seed : validate_seed, seed));
        if (!running) {
            std::cout << config_path << ": ok, " << config.experiments.size() << " experiment(s), sha256 "
                      << config.sha256 << "\n";
            return 0;
        }
        if (run_out->count()) config.output = out_dir;
        if (run_jobs->count()) config.jobs = jobs;

        const auto outcome = mehler::cli::run(config);
        for (const auto& r : outcome.results) print_result(r);
        std::cout << "report: " << config.output.string() << " (exit " << outcome.exit_code << ")\n";
        return outcome.exit_code;
    } catch (const mehler::InvalidArgument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_numerical;
    }
}
