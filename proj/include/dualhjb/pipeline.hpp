#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dualhjb/config.hpp"
#include "dualhjb/io.hpp"

namespace dualhjb {

struct CommandOptions {
    std::filesystem::path config;
    std::filesystem::path out = "out";
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    bool dump_paths = false;
};

struct CommandResult {
    bool passed = true;  // every invoked check passed
    std::vector<std::filesystem::path> outputs;
    Json report;         // the JSON report written, when any
};

/// out/dual.csv
CommandResult cmd_solve(const CommandOptions& opt);
/// out/dual.csv -> out/primal.csv
CommandResult cmd_recover(const CommandOptions& opt);
/// out/primal.csv -> out/sim_report.json (+ out/paths.csv)
CommandResult cmd_simulate(const CommandOptions& opt);
/// out/verify_report.json
CommandResult cmd_verify(const CommandOptions& opt);
/// out/random_horizon.json and/or out/illiquid.json, out/kv_trace.csv
CommandResult cmd_app(const CommandOptions& opt);

/// Dispatches by name, prints errors to stderr and returns the process exit code.
int run_command(const std::string& name, const CommandOptions& opt);

}  // namespace dualhjb
