#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "imdac/cli.hpp"
#include "imdac/scenarios.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Internal-model dynamic average consensus simulator with link-fault detection"};
    app.require_subcommand(1);

    std::string scenario;
    std::string out_dir = "out";
    std::optional<double> dt;
    std::optional<double> t_end;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("scenario", scenario, "Scenario file, or builtin:<name>")->required();
        sub->add_option("--dt", dt, "Override the integration step");
        sub->add_option("--t-end", t_end, "Override the final time");
    };

    auto* run = app.add_subcommand("run", "Simulate a scenario and write trajectory.csv and metrics.txt");
    add_common(run);
    run->add_option("--out", out_dir, "Output directory")->capture_default_str();

    auto* check = app.add_subcommand("check", "Verify the consensus design conditions and UIO existence");
    add_common(check);

    auto* design = app.add_subcommand("design", "Print the UIO matrices for the scenario's estimator");
    add_common(design);

    auto* show = app.add_subcommand("show", "Print a scenario as an explicit scenario file");
    show->add_option("scenario", scenario, "Scenario file, or builtin:<name>")->required();

    auto* list = app.add_subcommand("list", "List the builtin scenarios");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : imdac::cli::config_error;
    }

    const imdac::cli::Overrides ov{dt, t_end};
    if (*run) return imdac::cli::cmd_run(scenario, out_dir, ov, std::cout, std::cerr);
    if (*check) return imdac::cli::cmd_check(scenario, ov, std::cout, std::cerr);
    if (*design) return imdac::cli::cmd_design(scenario, ov, std::cout, std::cerr);
    if (*show) return imdac::cli::cmd_show(scenario, std::cout, std::cerr);
    if (*list) {
        for (const auto& name : imdac::builtin_names()) std::cout << "builtin:" << name << "\n";
        return 0;
    }
    return imdac::cli::config_error;
}
