#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "dualhjb/config.hpp"
#include "dualhjb/io.hpp"

using namespace dualhjb;
namespace fs = std::filesystem;

namespace {

const char* kSmall = R"(# comment
[market]
b = 0.3
sigma = 0.5
T = 1

[utility]
family = power
p = 0.5
a_T = 1

[grid]
n_y = 60
n_t = 20
n_x = 31

[sim]
n_paths = 1000
seed = 3
)";

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error raised");
    return ErrorCode::InvalidArgument;
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "dualhjb_config_io";
    fs::create_directories(dir);
    return dir / name;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace

TEST_CASE("parse a small config") {
    const auto cfg = parse_config(kSmall);
    CHECK(cfg.market_spec.b == 0.3);
    CHECK(cfg.utility_spec.a_T == 1.0);
    CHECK(cfg.grid.n_y == 60);
    CHECK(cfg.grid.T == 1.0);
    CHECK(cfg.primal.n_x == 31);
    CHECK(cfg.sim.seed == 3);
    CHECK(cfg.merton_oracle());
    CHECK_FALSE(cfg.random_horizon);
    CHECK(cfg.hash == sha256_hex(kSmall));
    CHECK(cfg.market().sigma(0.5) == 0.5);
}

TEST_CASE("piecewise market knots") {
    const auto cfg = parse_config("[market]\nT = 2\nsigma_knots = 0:0.2; 2:0.4\n");
    CHECK(cfg.market().sigma(1.0) == doctest::Approx(0.3));
    CHECK_FALSE(cfg.merton_oracle());
    CHECK(code_of([] { parse_config("[market]\nb_knots = 0-0.2\n"); }) == ErrorCode::ConfigParse);
}

TEST_CASE("config errors") {
    CHECK(code_of([] { parse_config("[market]\nb = 0.3\nbogus = 1\n"); }) == ErrorCode::ConfigParse);
    CHECK(code_of([] { parse_config("[nonsense]\nx = 1\n"); }) == ErrorCode::ConfigParse);
    CHECK(code_of([] { parse_config("[market]\nb = abc\n"); }) == ErrorCode::ConfigParse);
    CHECK(code_of([] { parse_config("[market]\nb = 0.3x\n"); }) == ErrorCode::ConfigParse);
    CHECK(code_of([] { parse_config("[grid]\nn_y = -5\n"); }) == ErrorCode::ConfigParse);
    CHECK(code_of([] { parse_config("[grid]\ny_min = 2\ny_max = 1\n"); }) == ErrorCode::ConfigParse);
    CHECK(code_of([] { parse_config("[market]\nb = 0.3\n[market\n"); }) == ErrorCode::ConfigParse);
    CHECK(code_of([] { parse_config("[utility]\nfamily = log\n"); }) == ErrorCode::ConfigParse);
    CHECK(code_of([] { parse_config("[sim]\nantithetic = maybe\n"); }) == ErrorCode::ConfigParse);
    CHECK(code_of([] { parse_config("[utility]\na_x = 1\n[random_horizon]\nrate = 0.5\n"); }) ==
          ErrorCode::ConfigParse);
    CHECK(code_of([] { load_config("/nonexistent/dir/x.cfg"); }) == ErrorCode::Io);
}

TEST_CASE("optional sections") {
    const auto cfg = parse_config(std::string(kSmall) + "[random_horizon]\nlaw = exponential\nrate = 0.25\n");
    REQUIRE(cfg.random_horizon);
    CHECK(cfg.random_horizon->rate == 0.25);
    CHECK_FALSE(cfg.merton_oracle());
    // survival weight e^{-rate T} on the terminal term
    CHECK(cfg.effective_utility().u2(1.0) == doctest::Approx(2.0 * std::exp(-0.25)));

    const auto il = parse_config("[illiquid]\nrho = 0.3\nforce_alpha_zero = true\nn_t = 17\n");
    REQUIRE(il.illiquid);
    CHECK(il.illiquid->rho == 0.3);
    CHECK(il.kv.force_alpha_zero);
    CHECK(il.kv.n_t == 17);
}

TEST_CASE("sha-256 known answers") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("seventeen digits round trip") {
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> u(-30.0, 30.0);
    for (int i = 0; i < 10000; ++i) {
        const double v = std::exp(u(gen)) * (i % 2 ? 1 : -1);
        CHECK(std::strtod(fmt17(v).c_str(), nullptr) == v);
    }
}

TEST_CASE("dual csv round trip is bit exact") {
    const auto cfg = parse_config(kSmall);
    const auto dual = solve_dual(cfg.market(), cfg.utility(), cfg.grid);
    const auto path = scratch("dual.csv");
    const auto text = dual_csv(dual);
    write_atomic(path, text);
    const auto back = read_dual_csv(path);
    CHECK(back.grid.n_y == dual.grid.n_y);
    CHECK(back.grid.n_t == dual.grid.n_t);
    CHECK(back.y == dual.y);
    CHECK(back.W == dual.W);
    CHECK(back.W_y == dual.W_y);
    CHECK(back.W_yy == dual.W_yy);
    CHECK(dual_csv(back) == text);

    const auto tab = read_csv(path);
    CHECK(tab.rows.size() == (dual.grid.n_t + 1) * dual.grid.n_y);
    CHECK(tab.columns == std::vector<std::string>{"t", "y", "W", "W_y", "W_yy"});
    REQUIRE(tab.meta_value("schema"));
    CHECK(*tab.meta_value("schema") == kDualSchema);

    const auto primal = recover_primal(dual, cfg.market(), cfg.utility(), cfg.primal);
    const auto ppath = scratch("primal.csv");
    write_atomic(ppath, primal_csv(primal));
    const auto pb = read_primal_csv(ppath);
    CHECK(pb.x == primal.x);
    CHECK(pb.t == primal.t);
    CHECK(pb.V == primal.V);
    CHECK(pb.Pi == primal.Pi);
    CHECK(primal_csv(pb) == slurp(ppath));
}

TEST_CASE("atomic write replaces the target and leaves no temporary") {
    const auto path = scratch("atomic.txt");
    write_atomic(path, "first\n");
    write_atomic(path, "second\n");
    CHECK(slurp(path) == "second\n");
    auto tmp = path;
    tmp += ".tmp";
    CHECK_FALSE(fs::exists(tmp));
    CHECK(code_of([&] { write_atomic(path / "below_a_file", "x"); }) == ErrorCode::Io);
}

TEST_CASE("artifact errors") {
    CHECK(code_of([] { read_dual_csv(scratch("absent.csv")); }) == ErrorCode::UpstreamArtifactMissing);
    const auto wrong = scratch("wrong.csv");
    write_atomic(wrong, "# schema: something/1\na,b\n1,2\n");
    CHECK(code_of([&] { read_dual_csv(wrong); }) == ErrorCode::Io);
    const auto ragged = scratch("ragged.csv");
    write_atomic(ragged, "a,b\n1,2\n3\n");
    CHECK(code_of([&] { read_csv(ragged); }) == ErrorCode::Io);
    const auto junk = scratch("junk.csv");
    write_atomic(junk, "a,b\n1,zz\n");
    CHECK(code_of([&] { read_csv(junk); }) == ErrorCode::Io);
}

TEST_CASE("trace csv layout") {
    std::vector<TraceRow> rows = {{0, 0.0, 1.0, 0.5, 2.4}, {0, 0.01, 1.01, 0.51, 2.42}};
    const auto text = trace_csv(rows);
    CHECK(text.find("# schema: dualhjb.paths/1\npath,t,X,c,pi\n0,0,1,0.5,2.3999999999999999\n") == 0);
}
