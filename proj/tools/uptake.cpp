#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "uptake/cli_io.hpp"
#include "uptake/errors.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Moisture uptake simulation and parameter estimation"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool cfl_strict = false;
    CLI::Option* seed_option = nullptr;

    struct Sub {
        uptake::TaskKind task;
        const char* help;
    };
    const Sub subs[] = {
        {uptake::TaskKind::Simulate, "Integrate the problem and write heights.csv and profiles.csv"},
        {uptake::TaskKind::Validate, "Compare schemes and integrators against a fine reference"},
        {uptake::TaskKind::Sensitivity, "Write sensitivity series and the Fisher matrix"},
        {uptake::TaskKind::Estimate, "Fit parameters to observed heights"},
        {uptake::TaskKind::Scales, "Print the dimensionless numbers of the reference scales"},
    };
    std::vector<std::pair<CLI::App*, uptake::TaskKind>> commands;
    for (const auto& s : subs) {
        auto* cmd = app.add_subcommand(uptake::to_string(s.task), s.help);
        cmd->add_option("--config,-c", config_path, "JSON configuration file");
        cmd->add_option("--out,-o", out_dir, "Output directory (overrides output.dir)");
        cmd->add_flag("--cfl-strict", cfl_strict, "Use the strict nonlinear CFL bound");
        if (s.task == uptake::TaskKind::Estimate) seed_option = cmd->add_option("--seed", seed, "Seed for synthetic observations");
        commands.emplace_back(cmd, s.task);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    uptake::TaskKind task = uptake::TaskKind::Simulate;
    for (const auto& [cmd, kind] : commands) {
        if (cmd->parsed()) task = kind;
    }

    uptake::RunConfig config;
    try {
        if (!config_path.empty()) config = uptake::load_config(config_path);
    } catch (const uptake::Error& e) {
        std::cerr << "ERROR[" << e.code() << "]: " << e.what() << '\n';
        return 2;
    }

    uptake::RunOptions options;
    if (!out_dir.empty()) options.out_dir = out_dir;
    if (seed_option->count() > 0) options.seed = seed;
    options.cfl_strict = cfl_strict;
    return uptake::run(task, config, options, std::cerr);
}
