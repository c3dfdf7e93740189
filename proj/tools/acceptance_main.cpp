// Runs the acceptance criteria and prints one pass/fail line per criterion.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <set>

#include "mehler/acceptance.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria 1-14"};
    mehler::acceptance::Options options;
    std::vector<int> only;
    std::string json_path;
    app.add_option("--seed", options.seed, "Random seed")->default_val(1);
    app.add_option("--only", only, "Criterion ids to run (default: all)")->check(CLI::Range(1, 14));
    app.add_option("--json", json_path, "Write the results as JSON");
    CLI11_PARSE(app, argc, argv);

    const std::set<int> selected(only.begin(), only.end());
    nlohmann::json report = nlohmann::json::array();
    bool all = true;
    for (const auto& c : mehler::acceptance::criteria()) {
        if (!selected.empty() && !selected.count(c.id)) continue;
        const auto r = mehler::acceptance::run(c, options);
        std::cout << mehler::acceptance::format_line(r) << std::endl;
        report.push_back(mehler::acceptance::to_json(r));
        all = all && r.passed;
    }
    if (!json_path.empty()) std::ofstream(json_path) << report.dump(2) << '\n';
    return all ? 0 : 1;
}
