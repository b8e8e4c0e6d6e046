#include <CLI11.hpp>

#include <iostream>

#include "dualhjb/error.hpp"
#include "dualhjb/pipeline.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Dual HJB solver for consumption-investment problems"};
    app.require_subcommand(1, 1);

    dualhjb::CommandOptions opt;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    for (const auto& [name, help] : {std::pair{"solve", "solve the dual HJB and write dual.csv"},
                                     std::pair{"recover", "recover the primal value from dual.csv"},
                                     std::pair{"simulate", "closed-loop Monte Carlo from primal.csv"},
                                     std::pair{"verify", "run the invariant and oracle suite"},
                                     std::pair{"app", "run the random-horizon / illiquid applications"}}) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", opt.config, "model config (INI)")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", opt.out, "output directory")->capture_default_str();
        sub->add_option("--seed", seed, "override [sim] seed");
        sub->add_option("--threads", threads, "cap worker threads");
        sub->add_flag("--dump-paths", opt.dump_paths, "write paths.csv (simulate)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : dualhjb::exit_code(dualhjb::ErrorCode::ConfigParse);
    }
    auto* sub = app.get_subcommands().front();
    if (sub->count("--seed")) opt.seed = seed;
    if (sub->count("--threads")) opt.threads = threads;
    return dualhjb::run_command(sub->get_name(), opt);
}
