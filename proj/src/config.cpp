#include "dualhjb/config.hpp"

#include <openssl/evp.h>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace dualhjb {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>>& allowed_keys() {
    static const std::map<std::string, std::set<std::string>> keys = {
        {"market", {"b", "sigma", "T", "b_knots", "sigma_knots"}},
        {"utility", {"family", "p", "a_c", "a_x", "a_T"}},
        {"grid", {"y_min", "y_max", "n_y", "n_t", "n_x", "shrink"}},
        {"sim",
         {"n_paths", "dt_sim", "seed", "antithetic", "threads", "budget", "t0", "x0", "trace_paths",
          "trace_stride"}},
        {"random_horizon", {"law", "rate"}},
        {"illiquid",
         {"b_L", "sigma_L", "b_I", "sigma_I", "rho", "p", "beta", "arrival_rate", "margin", "y_min", "y_max",
          "n_y", "n_t", "T_trunc", "max_iter", "tol", "quad_order", "force_alpha_zero", "richardson",
          "alpha_scan", "alpha_tol", "K_start"}},
    };
    return keys;
}

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::ConfigParse, what); }

template <class T>
void read(const pt::ptree& sec, const std::string& section, const std::string& key, T& out) {
    auto v = sec.get_optional<std::string>(key);
    if (!v) return;
    std::istringstream in(*v);
    T parsed{};
    if constexpr (std::is_same_v<T, bool>) {
        const std::string s = *v;
        if (s == "true" || s == "1" || s == "yes") parsed = true;
        else if (s == "false" || s == "0" || s == "no") parsed = false;
        else bad("[" + section + "] " + key + ": expected a boolean, got '" + s + "'");
    } else if constexpr (std::is_same_v<T, std::string>) {
        parsed = *v;
    } else {
        in >> parsed;
        if (!in || !(in >> std::ws).eof()) bad("[" + section + "] " + key + ": cannot parse '" + *v + "'");
        if constexpr (std::is_unsigned_v<T>) {
            if (v->find('-') != std::string::npos) bad("[" + section + "] " + key + ": must be nonnegative");
        }
    }
    out = parsed;
}

std::vector<std::pair<double, double>> parse_knots(const std::string& text, const std::string& key) {
    std::vector<std::pair<double, double>> knots;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ';')) {
        if (item.find_first_not_of(" \t") == std::string::npos) continue;
        double t = 0.0;
        double v = 0.0;
        char colon = 0;
        std::istringstream kin(item);
        if (!(kin >> t >> colon >> v) || colon != ':' || !(kin >> std::ws).eof())
            bad("[market] " + key + ": knot '" + item + "' is not t:value");
        knots.emplace_back(t, v);
    }
    if (knots.empty()) bad("[market] " + key + ": no knots");
    return knots;
}

void require(bool ok, const std::string& what) {
    if (!ok) bad(what);
}

}  // namespace

std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error(ErrorCode::Io, "SHA-256 digest failed");
    std::string hex;
    hex.reserve(2 * len);
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", digest[i]);
        hex += buf;
    }
    return hex;
}

RunConfig parse_config(const std::string& text, const std::filesystem::path& origin) {
    pt::ptree tree;
    try {
        std::istringstream in(text);
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        bad(origin.string() + ": line " + std::to_string(e.line()) + ": " + e.message());
    }

    for (const auto& [name, sec] : tree) {
        auto it = allowed_keys().find(name);
        if (it == allowed_keys().end()) {
            if (sec.empty()) bad(origin.string() + ": key '" + name + "' outside a section");
            bad(origin.string() + ": unknown section [" + name + "]");
        }
        for (const auto& kv : sec)
            if (!it->second.count(kv.first)) bad("[" + name + "] unknown key '" + kv.first + "'");
    }

    RunConfig cfg;
    cfg.path = origin;
    cfg.text = text;
    cfg.hash = sha256_hex(text);

    const pt::ptree empty;
    auto section = [&](const char* name) -> const pt::ptree& {
        auto child = tree.get_child_optional(name);
        return child ? *child : empty;
    };

    {
        const auto& s = section("market");
        read(s, "market", "b", cfg.market_spec.b);
        read(s, "market", "sigma", cfg.market_spec.sigma);
        read(s, "market", "T", cfg.market_spec.T);
        read(s, "market", "b_knots", cfg.market_spec.b_knots);
        read(s, "market", "sigma_knots", cfg.market_spec.sigma_knots);
        require(cfg.market_spec.T > 0.0, "[market] T must be positive");
        if (!cfg.market_spec.b_knots.empty()) parse_knots(cfg.market_spec.b_knots, "b_knots");
        if (!cfg.market_spec.sigma_knots.empty()) parse_knots(cfg.market_spec.sigma_knots, "sigma_knots");
    }
    {
        const auto& s = section("utility");
        auto& u = cfg.utility_spec;
        read(s, "utility", "family", u.family);
        read(s, "utility", "p", u.p);
        read(s, "utility", "a_c", u.a_c);
        read(s, "utility", "a_x", u.a_x);
        read(s, "utility", "a_T", u.a_T);
        require(u.family == "power" || u.family == "zero",
                "[utility] family must be 'power' or 'zero', got '" + u.family + "'");
    }
    {
        const auto& s = section("grid");
        cfg.grid.T = cfg.market_spec.T;
        read(s, "grid", "y_min", cfg.grid.y_min);
        read(s, "grid", "y_max", cfg.grid.y_max);
        read(s, "grid", "n_y", cfg.grid.n_y);
        read(s, "grid", "n_t", cfg.grid.n_t);
        read(s, "grid", "n_x", cfg.primal.n_x);
        read(s, "grid", "shrink", cfg.primal.shrink);
        require(cfg.grid.y_min > 0.0 && cfg.grid.y_max > cfg.grid.y_min, "[grid] need 0 < y_min < y_max");
        require(cfg.grid.n_y >= 16, "[grid] n_y must be at least 16");
        require(cfg.grid.n_t >= 1, "[grid] n_t must be positive");
        require(cfg.primal.n_x >= 3, "[grid] n_x must be at least 3");
        require(cfg.primal.shrink >= 0.0 && cfg.primal.shrink < 0.5, "[grid] shrink must lie in [0, 0.5)");
    }
    {
        const auto& s = section("sim");
        read(s, "sim", "n_paths", cfg.sim.n_paths);
        read(s, "sim", "dt_sim", cfg.sim.dt_sim);
        read(s, "sim", "seed", cfg.sim.seed);
        read(s, "sim", "antithetic", cfg.sim.antithetic);
        read(s, "sim", "threads", cfg.sim.threads);
        read(s, "sim", "budget", cfg.sim.budget);
        read(s, "sim", "t0", cfg.t0);
        read(s, "sim", "x0", cfg.x0);
        read(s, "sim", "trace_paths", cfg.trace.n_paths);
        read(s, "sim", "trace_stride", cfg.trace.stride);
        require(cfg.sim.dt_sim > 0.0, "[sim] dt_sim must be positive");
        require(cfg.x0 > 0.0, "[sim] x0 must be positive");
        require(cfg.t0 >= 0.0 && cfg.t0 < cfg.market_spec.T, "[sim] t0 must lie in [0, T)");
        require(cfg.trace.stride >= 1, "[sim] trace_stride must be positive");
    }
    if (tree.get_child_optional("random_horizon")) {
        const auto& s = section("random_horizon");
        RandomHorizonConfig rh;
        read(s, "random_horizon", "law", rh.law);
        read(s, "random_horizon", "rate", rh.rate);
        require(rh.law == "exponential", "[random_horizon] law must be 'exponential'");
        require(rh.rate > 0.0, "[random_horizon] rate must be positive");
        require(cfg.utility_spec.a_x == 0.0, "[random_horizon] needs a_x = 0 (a_T is the payoff at tau)");
        cfg.random_horizon = rh;
    }
    if (tree.get_child_optional("illiquid")) {
        const auto& s = section("illiquid");
        IlliquidParams il;
        read(s, "illiquid", "b_L", il.b_L);
        read(s, "illiquid", "sigma_L", il.sigma_L);
        read(s, "illiquid", "b_I", il.b_I);
        read(s, "illiquid", "sigma_I", il.sigma_I);
        read(s, "illiquid", "rho", il.rho);
        read(s, "illiquid", "p", il.p);
        read(s, "illiquid", "beta", il.beta);
        read(s, "illiquid", "arrival_rate", il.arrival_rate);
        read(s, "illiquid", "margin", il.margin);
        auto& kv = cfg.kv;
        read(s, "illiquid", "y_min", kv.y_min);
        read(s, "illiquid", "y_max", kv.y_max);
        read(s, "illiquid", "n_y", kv.n_y);
        read(s, "illiquid", "n_t", kv.n_t);
        read(s, "illiquid", "T_trunc", kv.T_trunc);
        read(s, "illiquid", "max_iter", kv.max_iter);
        read(s, "illiquid", "tol", kv.tol);
        read(s, "illiquid", "quad_order", kv.quad_order);
        read(s, "illiquid", "force_alpha_zero", kv.force_alpha_zero);
        read(s, "illiquid", "richardson", kv.richardson);
        read(s, "illiquid", "alpha_scan", kv.alpha_scan);
        read(s, "illiquid", "alpha_tol", kv.alpha_tol);
        read(s, "illiquid", "K_start", kv.K_start);
        cfg.illiquid = il;
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read config " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path);
}

MarketModel RunConfig::market() const {
    const auto& m = market_spec;
    if (m.b_knots.empty() && m.sigma_knots.empty()) return MarketModel::constant(m.b, m.sigma, m.T);
    auto b = m.b_knots.empty() ? std::vector<std::pair<double, double>>{{0.0, m.b}} : parse_knots(m.b_knots, "b_knots");
    auto s = m.sigma_knots.empty() ? std::vector<std::pair<double, double>>{{0.0, m.sigma}}
                                   : parse_knots(m.sigma_knots, "sigma_knots");
    return MarketModel::piecewise_linear(std::move(b), std::move(s), m.T);
}

UtilityModel RunConfig::utility() const {
    const auto& u = utility_spec;
    if (u.family == "zero") return zero_utility(u.p);
    return power_utility(u.p, u.a_c, u.a_x, u.a_T);
}

UtilityModel RunConfig::effective_utility() const {
    if (!random_horizon) return utility();
    const auto& u = utility_spec;
    return power_random_horizon(u.p, exponential_law(random_horizon->rate), market_spec.T, u.a_c, u.a_T);
}

bool RunConfig::merton_oracle() const {
    return !random_horizon && utility_spec.family == "power" && utility_spec.a_x == 0.0 &&
           market_spec.b_knots.empty() && market_spec.sigma_knots.empty();
}

}  // namespace dualhjb
