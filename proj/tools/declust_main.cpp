#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "declust/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"declust: distributed dynamic clustering simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::string trace_a;
    std::string trace_b;
    long long seed = -1;
    long long rounds = -1;
    std::string out_dir;
    std::string format;
    int workers = 1;
    bool emit = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "scenario configuration file")
            ->required();
        cmd->add_option("--seed", seed, "override the run seed");
        cmd->add_option("--rounds", rounds, "override the round horizon");
        cmd->add_option("--out", out_dir, "redirect output artifacts to a directory");
        cmd->add_option("--format", format, "trace format: jsonl or csv");
    };

    CLI::App* validate = app.add_subcommand("validate", "validate a scenario file");
    add_common(validate);
    validate->add_flag("--emit", emit, "print the normalized configuration");

    CLI::App* run = app.add_subcommand("run", "run a scenario and write artifacts");
    add_common(run);
    run->add_option("--workers", workers, "parallel agent-tick workers")
        ->check(CLI::PositiveNumber);

    CLI::App* compare = app.add_subcommand("compare", "diff two JSONL traces");
    compare->add_option("trace_a", trace_a, "first trace")->required();
    compare->add_option("trace_b", trace_b, "second trace")->required();

    app.add_subcommand("selftest", "run the built-in invariant suites");

    CLI11_PARSE(app, argc, argv);

    declust::Overrides overrides;
    if (seed >= 0) overrides.seed = static_cast<std::uint64_t>(seed);
    if (rounds >= 0) overrides.rounds = rounds;
    if (!out_dir.empty()) overrides.out_dir = out_dir;
    if (!format.empty()) overrides.format = format;

    if (app.got_subcommand("validate")) {
        return declust::cli::validate_command(config_path, overrides, emit, std::cout,
                                              std::cerr);
    }
    if (app.got_subcommand("run")) {
        return declust::cli::run_command(config_path, overrides, workers, std::cout,
                                         std::cerr);
    }
    if (app.got_subcommand("compare")) {
        return declust::cli::compare_command(trace_a, trace_b, std::cout, std::cerr);
    }
    return declust::cli::selftest_command(std::cout, std::cerr);
}
