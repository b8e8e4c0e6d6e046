#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dualhjb/config.hpp"
#include "dualhjb/io.hpp"

namespace fs = std::filesystem;

namespace {

const char* kConfig = R"([market]
b = 0.3
sigma = 0.5
T = 1
[utility]
p = 0.5
a_T = 1
[grid]
n_y = 80
n_t = 40
n_x = 41
[sim]
n_paths = 2000
dt_sim = 1e-2
seed = 7
trace_paths = 4
trace_stride = 5
)";

fs::path workdir() {
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / "dualhjb_cli_test";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

fs::path write_file(const std::string& name, const std::string& text) {
    const auto p = workdir() / name;
    std::ofstream(p, std::ios::binary) << text;
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

int run(const std::string& args) {
    const std::string cmd = std::string(DUALHJB_BIN) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string cli(const std::string& sub, const fs::path& cfg, const fs::path& out, const std::string& extra = "") {
    return sub + " --config " + cfg.string() + " --out " + out.string() + (extra.empty() ? "" : " " + extra);
}

}  // namespace

TEST_CASE("solve writes the dual table") {
    const auto cfg = write_file("small.cfg", kConfig);
    const auto out = workdir() / "solve";
    REQUIRE(run(cli("solve", cfg, out)) == 0);
    const auto tab = dualhjb::read_csv(out / "dual.csv");
    CHECK(tab.rows.size() == 41 * 80);
    CHECK(tab.columns == std::vector<std::string>{"t", "y", "W", "W_y", "W_yy"});
    for (const char* key : {"schema", "y_min", "y_max", "n_y", "n_t", "T", "p", "max_residual", "growth_constant"})
        CHECK(tab.meta_value(key) != nullptr);
    const auto manifest = nlohmann::json::parse(slurp(out / "solve_manifest.json"));
    CHECK(manifest["config_hash"].get<std::string>() == dualhjb::sha256_hex(kConfig));
}

TEST_CASE("solve, recover and simulate chain") {
    const auto cfg = write_file("small.cfg", kConfig);
    const auto out = workdir() / "chain";
    REQUIRE(run(cli("solve", cfg, out)) == 0);
    REQUIRE(run(cli("recover", cfg, out)) == 0);
    const auto primal = dualhjb::read_csv(out / "primal.csv");
    CHECK(primal.rows.size() == 41 * 41);
    CHECK(primal.columns.size() == 8);

    REQUIRE(run(cli("simulate", cfg, out, "--dump-paths")) == 0);
    const auto first = slurp(out / "sim_report.json");
    const auto report = nlohmann::json::parse(first);
    CHECK(report.contains("estimate"));
    CHECK(report.contains("std_error"));
    const auto paths = dualhjb::read_csv(out / "paths.csv");
    CHECK(paths.columns == std::vector<std::string>{"path", "t", "X", "c", "pi"});
    CHECK(paths.rows.size() > 0);

    REQUIRE(run(cli("simulate", cfg, out, "--seed 7 --threads 2")) == 0);
    CHECK(slurp(out / "sim_report.json") == first);
    REQUIRE(run(cli("simulate", cfg, out, "--seed 8")) == 0);
    CHECK(slurp(out / "sim_report.json") != first);
}

TEST_CASE("random horizon application") {
    const auto cfg = write_file("rh.cfg", std::string(kConfig) + "[random_horizon]\nlaw = exponential\nrate = 0.5\n");
    const auto out = workdir() / "rh";
    const int code = run(cli("app", cfg, out));
    CHECK((code == 0 || code == 1));
    const auto j = nlohmann::json::parse(slurp(out / "random_horizon.json"));
    CHECK(j.contains("direct_estimate"));
    CHECK(j.contains("transformed_estimate"));
    CHECK(j["agree"].is_boolean());
    CHECK(code == (j["agree"].get<bool>() ? 0 : 1));
}

TEST_CASE("exit codes") {
    const auto good = write_file("small.cfg", kConfig);
    CHECK(run(cli("recover", good, workdir() / "empty")) == 4);
    CHECK(run(cli("simulate", good, workdir() / "empty")) == 4);

    const auto unknown = write_file("unknown.cfg", std::string(kConfig) + "bogus = 1\n");
    CHECK(run(cli("solve", unknown, workdir() / "x")) == 2);
    CHECK(run("solve --config " + (workdir() / "missing.cfg").string()) == 2);
    CHECK(run("frobnicate") == 2);
    CHECK(run("") == 2);

    const auto flat = write_file("flat.cfg", "[market]\nsigma = 0\n");
    CHECK(run(cli("solve", flat, workdir() / "x")) == 3);

    const auto plain = write_file("plain.cfg", kConfig);
    CHECK(run(cli("app", plain, workdir() / "x")) == 2);
}
