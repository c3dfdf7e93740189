#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "mehler/cli/config.hpp"

namespace mehler::cli {

using Cell = std::variant<double, std::string>;

struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
};

/// passed = |measured - target| <= tolerance unless the experiment decides otherwise.
struct Check {
    std::string name;
    double measured = 0.0;
    double target = 0.0;
    double tolerance = 0.0;
    bool passed = false;
};

/// One long-format plotting row.
struct PlotPoint {
    std::string x_var;
    double x = 0.0;
    std::string y_var;
    std::string series;
    double value = 0.0;
};

enum class Status { passed, tolerance_failure, numerical_failure };

std::string to_string(Status status);

struct ExperimentResult {
    std::string name;
    ExperimentKind kind = ExperimentKind::kernel;
    Status status = Status::passed;
    std::vector<Table> tables;
    std::vector<Check> checks;
    std::vector<PlotPoint> plot;
    nlohmann::json summary = nlohmann::json::object();
    std::string error;
    double seconds = 0.0;
};

/// Runs one experiment. Never throws: failures become numerical_failure results.
ExperimentResult run_experiment(const ExperimentConfig& experiment);

struct RunOutcome {
    std::vector<ExperimentResult> results;
    int exit_code = 0;  ///< 0 pass, 1 tolerance failure, 3 numerical failure
};

/// Runs every experiment (concurrently up to the worker count) and writes
/// <output>/<name>/{*.csv, plot.csv, result.json} and <output>/summary.json.
RunOutcome run(const RunConfig& config);

/// Writes a table as CSV preceded by a "# config_sha256=... seed=..." line.
void write_csv(std::ostream& out, const Table& table, const std::string& stamp);

/// Concatenates the plot rows of the report experiments matching the selector
/// ("all", an experiment kind, or an experiment name) as
/// experiment,x_var,x,y_var,series,value. Throws InvalidArgument on an unknown
/// selector or a missing report.
void emit_plot_data(const std::filesystem::path& report, const std::string& selector, std::ostream& out);

int exit_code_for(std::span<const ExperimentResult> results);

}  // namespace mehler::cli
