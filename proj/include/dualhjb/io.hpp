#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dualhjb/dual_solver.hpp"
#include "dualhjb/primal.hpp"
#include "dualhjb/simulate.hpp"

namespace dualhjb {

using Json = nlohmann::ordered_json;

inline constexpr const char* kDualSchema = "dualhjb.dual/1";
inline constexpr const char* kPrimalSchema = "dualhjb.primal/1";
inline constexpr const char* kTraceSchema = "dualhjb.paths/1";
inline constexpr const char* kVersion = "1.0.0";

/// Leading `# key: value` lines of a CSV file, in order.
using CsvMeta = std::vector<std::pair<std::string, std::string>>;

/// %.17g.
std::string fmt17(double v);

/// Writes to `path.tmp` and renames over `path`.
void write_atomic(const std::filesystem::path& path, const std::string& content);
void write_json(const std::filesystem::path& path, const Json& j);

/// Columns t,y,W,W_y,W_yy; N_t+1 blocks of N_y rows.
std::string dual_csv(const DualSolution& dual, const CsvMeta& extra = {});
/// Columns t,x,V,V_x,V_xx,C_feedback,Pi_feedback,duality_gap; nan marks slices
/// without a valid recovery.
std::string primal_csv(const PrimalSolution& primal, const CsvMeta& extra = {});
/// Columns path,t,X,c,pi.
std::string trace_csv(const std::vector<TraceRow>& rows, const CsvMeta& extra = {});

struct CsvTable {
    CsvMeta meta;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    const std::string* meta_value(const std::string& key) const;
    std::size_t column(const std::string& name) const;  // throws Io when absent
};

/// Throws UpstreamArtifactMissing when the file does not exist, Io on
/// malformed content.
CsvTable read_csv(const std::filesystem::path& path);

/// Rebuilds grid, W and the derivative fields; checks the schema line.
DualSolution read_dual_csv(const std::filesystem::path& path);
PrimalSolution read_primal_csv(const std::filesystem::path& path);

}  // namespace dualhjb
