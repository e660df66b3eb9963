#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>

#include "markprod/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"markprod: growth certificates and simulation for Markov-driven matrix products"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "experiment config file (JSON)")->required();
        sub->add_option("--out", out_dir, "output directory (overrides config)");
        sub->add_option("--seed", seed, "seed (overrides config)")->each([&](const std::string&) {
            seed_set = true;
        });
        sub->add_option("--threads", threads, "worker threads (overrides config and MARKPROD_THREADS)");
    };

    CLI::App* sim = app.add_subcommand("simulate", "Lyapunov growth report (CSV + summary)");
    CLI::App* certify = app.add_subcommand("certify", "norm-contraction certificates");
    CLI::App* decay = app.add_subcommand("decay", "Monte Carlo moment decay curve (CSV)");
    CLI::App* check = app.add_subcommand("check-invariants", "operator-identity suite");
    app.add_subcommand("list-builtins", "catalogue of builtin constructions");
    for (CLI::App* sub : {sim, certify, decay, check}) add_common(sub);

    CLI11_PARSE(app, argc, argv);

    const std::string task = app.get_subcommands().front()->get_name();
    if (task == "list-builtins") {
        return markprod::run_list_builtins(std::cout);
    }
    return markprod::run_task(task, config_path, std::cout, seed_set, seed, out_dir, threads);
}
