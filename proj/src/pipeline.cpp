#include "dualhjb/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <iostream>

#include "dualhjb/applications.hpp"
#include "dualhjb/checks.hpp"
#include "dualhjb/reference.hpp"

namespace dualhjb {

namespace {

using Clock = std::chrono::steady_clock;

struct Run {
    RunConfig cfg;
    CommandOptions opt;
    Json timings = Json::object();
    std::vector<std::filesystem::path> outputs;

    template <class F>
    auto timed(const std::string& phase, F&& f) {
        const auto start = Clock::now();
        auto result = f();
        timings[phase + "_s"] = std::chrono::duration<double>(Clock::now() - start).count();
        return result;
    }

    void emit(const std::string& name, const std::string& content) {
        write_atomic(opt.out / name, content);
        outputs.push_back(opt.out / name);
    }

    void emit_json(const std::string& name, const Json& j) {
        write_json(opt.out / name, j);
        outputs.push_back(opt.out / name);
    }

    void manifest(const std::string& command) {
        Json m;
        m["command"] = command;
        m["version"] = kVersion;
        m["config"] = cfg.path.string();
        m["config_hash"] = cfg.hash;
        m["y_min"] = cfg.grid.y_min;
        m["y_max"] = cfg.grid.y_max;
        m["n_y"] = cfg.grid.n_y;
        m["n_t"] = cfg.grid.n_t;
        m["T"] = cfg.grid.T;
        m["n_x"] = cfg.primal.n_x;
        m["seed"] = cfg.sim.seed;
        m["threads"] = cfg.sim.threads;
        m["n_paths"] = cfg.sim.n_paths;
        m["dt_sim"] = cfg.sim.dt_sim;
        for (const auto& [k, v] : timings.items()) m["timing_" + k] = v;
        Json files = Json::array();
        for (const auto& p : outputs) files.push_back(p.filename().string());
        m["outputs"] = files;
        write_json(opt.out / (command + "_manifest.json"), m);
    }
};

Run start(const CommandOptions& opt) {
    Run r{load_config(opt.config), opt, Json::object(), {}};
    if (opt.seed) r.cfg.sim.seed = *opt.seed;
    if (opt.threads) r.cfg.sim.threads = *opt.threads;
    const auto market = r.cfg.market();
    const auto utility = r.cfg.effective_utility();
    require_valid(validate_model(market, utility, ProbeGrid::regular(r.cfg.market_spec.T)));
    return r;
}

CsvMeta provenance(const Run& r) { return {{"config_hash", r.cfg.hash}, {"version", kVersion}}; }

void put_check(Json& j, const Check& c) {
    j[c.name + ".passed"] = c.passed;
    j[c.name + ".value"] = c.value;
    j[c.name + ".threshold"] = c.threshold;
    if (!c.detail.empty()) j[c.name + ".detail"] = c.detail;
}

void put_sim(Json& j, const std::string& prefix, const SimReport& s) {
    j[prefix + "estimate"] = s.estimate;
    j[prefix + "std_error"] = s.std_error;
    j[prefix + "n_paths"] = s.n_paths;
    j[prefix + "n_absorbed"] = s.n_absorbed;
    j[prefix + "n_rejected"] = s.n_rejected;
    j[prefix + "mean_terminal_state"] = s.mean_terminal_wealth;
}

/// W(t_0, y) with log W linear in log y between nodes.
double dual_value(const DualSolution& d, double y) {
    const double s = (std::log(y) - std::log(d.grid.y_min)) / d.grid.dxi();
    const auto j = static_cast<std::size_t>(std::clamp(s, 0.0, static_cast<double>(d.y.size() - 2)));
    const double w = s - static_cast<double>(j);
    return std::exp((1.0 - w) * std::log(d.W[0][j]) + w * std::log(d.W[0][j + 1]));
}

MertonCase merton_of(const RunConfig& cfg) {
    MertonCase m;
    m.p = cfg.utility_spec.p;
    m.b = cfg.market_spec.b;
    m.sigma = cfg.market_spec.sigma;
    m.T = cfg.market_spec.T;
    m.a_c = cfg.utility_spec.a_c;
    m.a_T = cfg.utility_spec.a_T;
    return m;
}

}  // namespace

CommandResult cmd_solve(const CommandOptions& opt) {
    auto r = start(opt);
    const auto dual = r.timed("solve", [&] { return solve_dual(r.cfg.market(), r.cfg.effective_utility(), r.cfg.grid); });
    r.emit("dual.csv", dual_csv(dual, provenance(r)));
    r.manifest("solve");
    return {true, r.outputs, {}};
}

CommandResult cmd_recover(const CommandOptions& opt) {
    auto r = start(opt);
    const auto dual = r.timed("load", [&] { return read_dual_csv(opt.out / "dual.csv"); });
    const auto primal = r.timed("recover", [&] {
        return recover_primal(dual, r.cfg.market(), r.cfg.effective_utility(), r.cfg.primal);
    });
    r.emit("primal.csv", primal_csv(primal, provenance(r)));
    r.manifest("recover");
    return {true, r.outputs, {}};
}

CommandResult cmd_simulate(const CommandOptions& opt) {
    auto r = start(opt);
    const auto primal = r.timed("load", [&] { return read_primal_csv(opt.out / "primal.csv"); });
    std::vector<TraceRow> trace;
    const auto rep = r.timed("simulate", [&] {
        return simulate_closed_loop(r.cfg.t0, r.cfg.x0, primal, r.cfg.market(), r.cfg.effective_utility(), r.cfg.sim,
                                    opt.dump_paths ? &trace : nullptr, r.cfg.trace);
    });
    Json j;
    j["schema"] = "dualhjb.sim_report/1";
    j["config_hash"] = r.cfg.hash;
    j["seed"] = r.cfg.sim.seed;
    j["dt_sim"] = r.cfg.sim.dt_sim;
    j["antithetic"] = r.cfg.sim.antithetic;
    j["t0"] = r.cfg.t0;
    j["x0"] = r.cfg.x0;
    j["value"] = primal.value(r.cfg.t0, r.cfg.x0);
    put_sim(j, "", rep);
    r.emit_json("sim_report.json", j);
    if (opt.dump_paths) r.emit("paths.csv", trace_csv(trace, provenance(r)));
    r.manifest("simulate");
    return {true, r.outputs, j};
}

CommandResult cmd_verify(const CommandOptions& opt) {
    auto r = start(opt);
    const auto& cfg = r.cfg;
    const auto market = cfg.market();
    const auto utility = cfg.effective_utility();
    const auto bundle = make_bundle(utility, cfg.grid.T);
    std::vector<Check> checks;

    const auto dual = r.timed("solve", [&] { return solve_dual(market, bundle, cfg.grid); });
    for (auto& c : dual_invariants(dual, bundle)) checks.push_back(c);
    const auto primal = r.timed("recover", [&] { return recover_primal(dual, market, utility, cfg.primal); });
    checks.push_back(gap_check(primal));
    checks.push_back(primal_shape_check(primal));
    checks.push_back(involution_check(primal, dual));

    if (cfg.merton_oracle()) {
        const auto m = merton_of(cfg);
        checks.push_back(merton_dual_check(dual, m));
        checks.push_back(merton_value_check(primal, m));
        checks.push_back(merton_fraction_check(primal, m));
        r.timed("convergence", [&] {
            checks.push_back(order_check("temporal_order", temporal_order_study(m, 801, {25, 50, 100}), 1.0));
            checks.push_back(order_check("spatial_order", spatial_order_study(m, {50, 100, 200}, 2000), 2.0));
            return 0;
        });
    }

    const auto test = r.timed("verification_mc", [&] {
        std::vector<std::pair<double, double>> gammas;
        for (double gc : {0.5, 1.0, 2.0})
            for (double gp : {0.5, 1.0, 2.0}) gammas.emplace_back(gc, gp);
        return verification_test(cfg.t0, cfg.x0, primal, market, utility, cfg.sim, gammas);
    });
    Json j;
    j["schema"] = "dualhjb.verify_report/1";
    j["config_hash"] = cfg.hash;
    j["seed"] = cfg.sim.seed;
    j["value"] = test.value;
    for (const auto& c : test.checks) {
        char name[64];
        std::snprintf(name, sizeof name, "mc_policy_%g_%g", c.gamma_c, c.gamma_pi);
        checks.push_back({name, c.passed, c.report.estimate, c.bound,
                          "se " + fmt17(c.report.std_error)});
    }

    if (cfg.merton_oracle() && cfg.t0 == 0.0) {
        r.timed("dual_mc", [&] {
            for (double y : {0.5, 1.0, 2.0}) {
                const auto s = simulate_dual_state(0.0, y, [](double, double) { return 0.0; }, market, bundle, cfg.sim);
                const double w = dual_value(dual, y);
                char name[32];
                std::snprintf(name, sizeof name, "dual_mc_y_%g", y);
                checks.push_back({name, std::abs(s.estimate - w) <= 2.0 * s.std_error, std::abs(s.estimate - w),
                                  2.0 * s.std_error, "W " + fmt17(w) + " estimate " + fmt17(s.estimate)});
            }
            return 0;
        });
    }
    const auto paired = r.timed("paired", [&] {
        const double h = 1e-4 * cfg.x0;
        const double y0 = (primal.value(cfg.t0, cfg.x0 + h) - primal.value(cfg.t0, cfg.x0 - h)) / (2.0 * h);
        return paired_supermartingale(cfg.t0, cfg.x0, y0, feedback_policy(primal), [](double, double) { return 0.0; },
                                      market, cfg.sim);
    });
    checks.push_back({"paired_supermartingale", paired.passed(), paired.mean, paired.bound + 2.0 * paired.std_error,
                      "se " + fmt17(paired.std_error)});

    const bool ok = all_passed(checks);
    j["passed"] = ok;
    for (const auto& c : checks) put_check(j, c);
    r.emit_json("verify_report.json", j);
    r.manifest("verify");
    return {ok, r.outputs, j};
}

CommandResult cmd_app(const CommandOptions& opt) {
    auto r = start(opt);
    const auto& cfg = r.cfg;
    if (!cfg.random_horizon && !cfg.illiquid)
        throw Error(ErrorCode::ConfigParse, "app needs a [random_horizon] or [illiquid] section");
    bool ok = true;
    Json report;

    if (cfg.random_horizon) {
        const auto market = cfg.market();
        const auto utility = cfg.effective_utility();
        const auto dual = r.timed("rh_solve", [&] { return solve_dual(market, utility, cfg.grid); });
        const auto primal = r.timed("rh_recover", [&] { return recover_primal(dual, market, utility, cfg.primal); });
        const double p = cfg.utility_spec.p, a_c = cfg.utility_spec.a_c, a_T = cfg.utility_spec.a_T;
        const Field2 G1 = [p, a_c](double, double c) { return a_c * std::pow(c, p) / p; };
        const Field2 G2 = [p, a_T](double, double x) { return a_T * std::pow(x, p) / p; };
        const auto law = exponential_law(cfg.random_horizon->rate);
        const auto mc = r.timed("rh_mc", [&] {
            return random_horizon_mc(cfg.x0, feedback_policy(primal), market, G1, G2, law, cfg.sim);
        });
        Json j;
        j["schema"] = "dualhjb.random_horizon/1";
        j["config_hash"] = cfg.hash;
        j["seed"] = cfg.sim.seed;
        j["rate"] = cfg.random_horizon->rate;
        j["value"] = primal.value(0.0, cfg.x0);
        put_sim(j, "direct_", mc.direct);
        put_sim(j, "transformed_", mc.transformed);
        j["combined_se"] = mc.combined_se;
        j["agree"] = mc.agree();
        ok = ok && mc.agree();
        r.emit_json("random_horizon.json", j);
        report["random_horizon"] = j;
    }

    if (cfg.illiquid) {
        const auto& par = *cfg.illiquid;
        const auto red = illiquid_reduction(par);
        KvResult partial;
        KvResult kv;
        bool converged = true;
        try {
            kv = r.timed("kv", [&] { return kv_fixed_point(par, cfg.kv, &partial); });
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NoConvergence) throw;
            kv = partial;
            converged = false;
        }
        const auto mom = log_J_moments(par, 1.0);
        Json j;
        j["schema"] = "dualhjb.illiquid/1";
        j["config_hash"] = cfg.hash;
        j["k"] = red.k;
        j["b_eff"] = red.b_eff;
        j["discount"] = red.discount;
        j["log_J_mean_per_year"] = mom.mean;
        j["log_J_var_per_year"] = mom.var;
        j["liquidation_value_t1_x1_y1_K1"] = liquidation_value(par, 1.0, 1.0, 1.0, 1.0, cfg.kv.quad_order);
        j["K_V"] = kv.K;
        j["alpha0"] = kv.alpha0;
        j["converged"] = converged;
        j["iterations"] = kv.trace.size();
        j["T_trunc"] = kv.T_trunc;
        j["truncation_factor"] = kv.truncation_factor;
        if (cfg.kv.force_alpha_zero) {
            const double oracle = merton_infinite_constant(par.beta, par.b_L, par.sigma_L, par.p);
            j["liquid_merton_constant"] = oracle;
            j["relative_error"] = std::abs(kv.K - oracle) / oracle;
        }
        ok = ok && converged;
        std::string trace = "# schema: dualhjb.kv_trace/1\n# config_hash: " + cfg.hash + "\niter,K,alpha0,value\n";
        for (std::size_t i = 0; i < kv.trace.size(); ++i)
            trace += std::to_string(i + 1) + "," + fmt17(kv.trace[i].K) + "," + fmt17(kv.trace[i].alpha0) + "," +
                     fmt17(kv.trace[i].value) + "\n";
        r.emit_json("illiquid.json", j);
        r.emit("kv_trace.csv", trace);
        report["illiquid"] = j;
    }
    r.manifest("app");
    return {ok, r.outputs, report};
}

int run_command(const std::string& name, const CommandOptions& opt) {
    try {
        CommandResult res;
        if (name == "solve") res = cmd_solve(opt);
        else if (name == "recover") res = cmd_recover(opt);
        else if (name == "simulate") res = cmd_simulate(opt);
        else if (name == "verify") res = cmd_verify(opt);
        else if (name == "app") res = cmd_app(opt);
        else throw Error(ErrorCode::ConfigParse, "unknown command '" + name + "'");
        for (const auto& p : res.outputs) std::cout << p.string() << '\n';
        if (!res.passed) std::cerr << "dualhjb " << name << ": some checks failed\n";
        return res.passed ? 0 : 1;
    } catch (const Error& e) {
        std::cerr << "dualhjb " << name << ": " << e.what() << '\n';
        return exit_code(e.code());
    } catch (const std::exception& e) {
        std::cerr << "dualhjb " << name << ": " << e.what() << '\n';
        return exit_code(ErrorCode::Io);
    }
}

}  // namespace dualhjb
