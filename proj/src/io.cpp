#include "dualhjb/io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace dualhjb {

std::string fmt17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create " + path.parent_path().string() + ": " + ec.message());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::Io, "cannot open " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw Error(ErrorCode::Io, "write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot rename " + tmp.string() + ": " + ec.message());
}

void write_json(const std::filesystem::path& path, const Json& j) { write_atomic(path, j.dump(2) + "\n"); }

namespace {

void put_meta(std::string& out, const char* schema, const CsvMeta& meta) {
    out += "# schema: ";
    out += schema;
    out += '\n';
    for (const auto& [k, v] : meta) out += "# " + k + ": " + v + "\n";
}

void put_row(std::string& out, std::initializer_list<double> vals) {
    bool first = true;
    for (double v : vals) {
        if (!first) out += ',';
        out += fmt17(v);
        first = false;
    }
    out += '\n';
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double meta_number(const CsvTable& tab, const std::string& key, const std::filesystem::path& path) {
    const auto* v = tab.meta_value(key);
    if (!v) throw Error(ErrorCode::Io, path.string() + ": metadata '" + key + "' missing");
    char* end = nullptr;
    const double d = std::strtod(v->c_str(), &end);
    if (end == v->c_str()) throw Error(ErrorCode::Io, path.string() + ": bad metadata '" + key + "'");
    return d;
}

void require_schema(const CsvTable& tab, const char* schema, const std::filesystem::path& path) {
    const auto* s = tab.meta_value("schema");
    if (!s || *s != schema)
        throw Error(ErrorCode::Io, path.string() + ": expected schema " + schema + ", found " + (s ? *s : "none"));
}

}  // namespace

std::string dual_csv(const DualSolution& dual, const CsvMeta& extra) {
    const auto& g = dual.grid;
    CsvMeta meta = {{"y_min", fmt17(g.y_min)}, {"y_max", fmt17(g.y_max)}, {"n_y", std::to_string(g.n_y)},
                    {"n_t", std::to_string(g.n_t)}, {"T", fmt17(g.T)},          {"p", fmt17(dual.p)},
                    {"max_residual", fmt17(dual.diagnostics.max_residual)},
                    {"growth_constant", fmt17(dual.diagnostics.growth_constant)},
                    {"min_clamp_inactive", fmt17(dual.diagnostics.min_clamp_inactive)}};
    meta.insert(meta.end(), extra.begin(), extra.end());
    std::string out;
    out.reserve(dual.n_slices() * g.n_y * 100);
    put_meta(out, kDualSchema, meta);
    out += "t,y,W,W_y,W_yy\n";
    for (std::size_t n = 0; n < dual.n_slices(); ++n) {
        const double t = g.t(n);
        for (std::size_t j = 0; j < g.n_y; ++j)
            put_row(out, {t, dual.y[j], dual.W[n][j], dual.W_y[n][j], dual.W_yy[n][j]});
    }
    return out;
}

std::string primal_csv(const PrimalSolution& primal, const CsvMeta& extra) {
    CsvMeta meta = {{"n_t", std::to_string(primal.n_slices() - 1)},
                    {"n_x", std::to_string(primal.x.size())},
                    {"p", fmt17(primal.p)}};
    meta.insert(meta.end(), extra.begin(), extra.end());
    std::string out;
    out.reserve(primal.n_slices() * primal.x.size() * 160);
    put_meta(out, kPrimalSchema, meta);
    out += "t,x,V,V_x,V_xx,C_feedback,Pi_feedback,duality_gap\n";
    for (std::size_t n = 0; n < primal.n_slices(); ++n)
        for (std::size_t i = 0; i < primal.x.size(); ++i)
            put_row(out, {primal.t[n], primal.x[i], primal.V[n][i], primal.V_x[n][i], primal.V_xx[n][i],
                          primal.C[n][i], primal.Pi[n][i], primal.gap[n][i]});
    return out;
}

std::string trace_csv(const std::vector<TraceRow>& rows, const CsvMeta& extra) {
    std::string out;
    put_meta(out, kTraceSchema, extra);
    out += "path,t,X,c,pi\n";
    for (const auto& r : rows) {
        out += std::to_string(r.path);
        out += ',';
        put_row(out, {r.t, r.X, r.c, r.pi});
    }
    return out;
}

const std::string* CsvTable::meta_value(const std::string& key) const {
    for (const auto& [k, v] : meta)
        if (k == key) return &v;
    return nullptr;
}

std::size_t CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == name) return i;
    throw Error(ErrorCode::Io, "column '" + name + "' missing");
}

CsvTable read_csv(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw Error(ErrorCode::UpstreamArtifactMissing, path.string() + " not found");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
    CsvTable tab;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto colon = line.find(':');
            if (colon == std::string::npos) continue;
            tab.meta.emplace_back(trim(line.substr(1, colon - 1)), trim(line.substr(colon + 1)));
            continue;
        }
        std::istringstream fields(line);
        std::string cell;
        if (tab.columns.empty()) {
            while (std::getline(fields, cell, ',')) tab.columns.push_back(trim(cell));
            continue;
        }
        std::vector<double> row;
        row.reserve(tab.columns.size());
        while (std::getline(fields, cell, ',')) {
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str())
                throw Error(ErrorCode::Io, path.string() + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
            row.push_back(v);
        }
        if (row.size() != tab.columns.size())
            throw Error(ErrorCode::Io, path.string() + ":" + std::to_string(lineno) + ": expected " +
                                           std::to_string(tab.columns.size()) + " fields");
        tab.rows.push_back(std::move(row));
    }
    return tab;
}

DualSolution read_dual_csv(const std::filesystem::path& path) {
    const auto tab = read_csv(path);
    require_schema(tab, kDualSchema, path);
    DualSolution sol;
    auto& g = sol.grid;
    g.y_min = meta_number(tab, "y_min", path);
    g.y_max = meta_number(tab, "y_max", path);
    g.n_y = static_cast<std::size_t>(meta_number(tab, "n_y", path));
    g.n_t = static_cast<std::size_t>(meta_number(tab, "n_t", path));
    g.T = meta_number(tab, "T", path);
    sol.p = meta_number(tab, "p", path);
    sol.diagnostics.max_residual = meta_number(tab, "max_residual", path);
    sol.diagnostics.growth_constant = meta_number(tab, "growth_constant", path);
    sol.diagnostics.min_clamp_inactive = meta_number(tab, "min_clamp_inactive", path);
    if (tab.rows.size() != (g.n_t + 1) * g.n_y)
        throw Error(ErrorCode::Io, path.string() + ": row count does not match the grid");
    const std::size_t cy = tab.column("y");
    const std::size_t cw = tab.column("W");
    sol.y.resize(g.n_y);
    for (std::size_t j = 0; j < g.n_y; ++j) sol.y[j] = tab.rows[j][cy];
    sol.W.assign(g.n_t + 1, std::vector<double>(g.n_y));
    for (std::size_t n = 0; n <= g.n_t; ++n)
        for (std::size_t j = 0; j < g.n_y; ++j) sol.W[n][j] = tab.rows[n * g.n_y + j][cw];
    sol.clamp_bounds.assign(g.n_t + 1, {0.0, 0.0});
    sol.diagnostics.iterations.assign(g.n_t + 1, 0);
    compute_derivatives(sol);
    return sol;
}

PrimalSolution read_primal_csv(const std::filesystem::path& path) {
    const auto tab = read_csv(path);
    require_schema(tab, kPrimalSchema, path);
    PrimalSolution out;
    out.p = meta_number(tab, "p", path);
    const auto S = static_cast<std::size_t>(meta_number(tab, "n_t", path)) + 1;
    const auto M = static_cast<std::size_t>(meta_number(tab, "n_x", path));
    if (tab.rows.size() != S * M || M < 2 || S < 2)
        throw Error(ErrorCode::Io, path.string() + ": row count does not match the grid");
    const std::size_t ct = tab.column("t"), cx = tab.column("x"), cV = tab.column("V"), cVx = tab.column("V_x"),
                      cVxx = tab.column("V_xx"), cC = tab.column("C_feedback"), cP = tab.column("Pi_feedback"),
                      cg = tab.column("duality_gap");
    auto table = [&] { return std::vector<std::vector<double>>(S, std::vector<double>(M)); };
    out.V = table();
    out.V_x = table();
    out.V_xx = table();
    out.V_t = table();
    out.C = table();
    out.Pi = table();
    out.gap = table();
    out.gap_tol = table();
    out.t.resize(S);
    out.x.resize(M);
    out.slice_valid.assign(S, true);
    for (std::size_t n = 0; n < S; ++n) {
        out.t[n] = tab.rows[n * M][ct];
        for (std::size_t i = 0; i < M; ++i) {
            const auto& r = tab.rows[n * M + i];
            if (n == 0) out.x[i] = r[cx];
            out.V[n][i] = r[cV];
            out.V_x[n][i] = r[cVx];
            out.V_xx[n][i] = r[cVxx];
            out.V_t[n][i] = std::nan("");
            out.C[n][i] = r[cC];
            out.Pi[n][i] = r[cP];
            out.gap[n][i] = r[cg];
            out.gap_tol[n][i] = std::nan("");
            if (!std::isfinite(r[cC]) || !std::isfinite(r[cP])) out.slice_valid[n] = false;
        }
    }
    return out;
}

}  // namespace dualhjb
