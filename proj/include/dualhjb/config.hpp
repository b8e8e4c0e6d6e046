#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "dualhjb/applications.hpp"
#include "dualhjb/dual_solver.hpp"
#include "dualhjb/model.hpp"
#include "dualhjb/primal.hpp"
#include "dualhjb/simulate.hpp"

namespace dualhjb {

struct UtilitySpec {
    std::string family = "power";  // power | zero
    double p = 0.5;
    double a_c = 1.0;
    double a_x = 0.0;
    double a_T = 0.0;
};

struct MarketSpec {
    double b = 0.3;
    double sigma = 0.5;
    double T = 1.0;
    std::string b_knots;      // "t:v;t:v" overrides b when set
    std::string sigma_knots;  // same for sigma
};

struct RandomHorizonConfig {
    std::string law = "exponential";
    double rate = 0.5;
};

struct RunConfig {
    std::filesystem::path path;
    std::string text;  // raw file contents
    std::string hash;  // SHA-256 of `text`, hex

    MarketSpec market_spec;
    UtilitySpec utility_spec;
    LogGrid grid;
    PrimalOptions primal;
    SimConfig sim;
    double t0 = 0.0;
    double x0 = 1.0;
    TraceOptions trace{16, 10};
    std::optional<RandomHorizonConfig> random_horizon;
    std::optional<IlliquidParams> illiquid;
    KvOptions kv;

    MarketModel market() const;
    UtilityModel utility() const;
    /// Utility of the problem actually solved (random-horizon composite when
    /// that section is present).
    UtilityModel effective_utility() const;
    /// True for constant b, sigma, power utility without wealth term.
    bool merton_oracle() const;
};

/// Parses an INI document with sections [market] [utility] [grid] [sim]
/// [random_horizon] [illiquid]. Throws ConfigParse on syntax errors,
/// unknown keys or bad values; Io when the file cannot be read.
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const std::string& text, const std::filesystem::path& origin = "<memory>");

std::string sha256_hex(const std::string& data);

}  // namespace dualhjb
