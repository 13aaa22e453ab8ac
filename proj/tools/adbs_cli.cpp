#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "adbs/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Adaptive decision boundaries for few-shot class-incremental learning"};
    app.require_subcommand(1);

    std::string config;
    adbs::cli::Overrides overrides;
    std::string out_dir;
    std::int64_t seed = 0;
    std::size_t seeds = 0;
    double grad_tol = 0.0;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
        cmd->add_option("--out", out_dir, "Output directory (overrides output_dir)");
        cmd->add_option("--seed", seed, "Run seed (overrides seed)")->check(CLI::NonNegativeNumber);
    };

    auto* run = app.add_subcommand("run", "Base session plus all incremental sessions");
    add_common(run);
    auto* ablate = app.add_subcommand("ablate", "fixed_baseline / adb_only / adb_ic over several seeds");
    add_common(ablate);
    ablate->add_option("--seeds", seeds, "Number of seeds (overrides ablation_seeds)")->check(CLI::PositiveNumber);
    auto* verify = app.add_subcommand("verify", "Gradient checks and the boundary-scaling probability sweep");
    add_common(verify);
    verify->add_option("--seeds", seeds, "Number of sweep instances (overrides verify_instances)")
        ->check(CLI::PositiveNumber);
    verify->add_option("--grad-tol", grad_tol, "Gradient-check tolerance (overrides grad_check_tolerance)")
        ->check(CLI::NonNegativeNumber);
    verify->add_flag("--inject-violation", overrides.inject_violation,
                     "Add a constraint-violating instance to show it is filtered");
    auto* gen = app.add_subcommand("gen-data", "Write the synthetic stream as a feature CSV");
    add_common(gen);

    CLI11_PARSE(app, argc, argv);

    auto given = [](CLI::App* cmd, const char* name) { return cmd->count(name) > 0; };
    CLI::App* cmd = app.get_subcommands().front();
    if (given(cmd, "--out")) overrides.out_dir = out_dir;
    if (given(cmd, "--seed")) overrides.seed = static_cast<std::uint64_t>(seed);
    if (cmd != run && cmd != gen && given(cmd, "--seeds")) overrides.seeds = seeds;
    if (cmd == verify && given(cmd, "--grad-tol")) overrides.grad_tolerance = grad_tol;

    if (cmd == run) return adbs::cli::cmd_run(config, overrides, std::cout, std::cerr);
    if (cmd == ablate) return adbs::cli::cmd_ablate(config, overrides, std::cout, std::cerr);
    if (cmd == verify) return adbs::cli::cmd_verify(config, overrides, std::cout, std::cerr);
    return adbs::cli::cmd_gen_data(config, overrides, std::cout, std::cerr);
}
