#pragma once

#include <string>

#include "mcrl/adapt.hpp"
#include "mcrl/gradcheck.hpp"
#include "mcrl/grid.hpp"

namespace mcrl {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr const char* kLibraryVersion = "1.0.0";

// Run-level facts echoed into a report next to the training report itself.
struct RunContext {
    std::string command;
    std::string source;
    std::string target;
    ModelDims dims;
    // Wall-clock time is the only nondeterministic field, so it is left out
    // unless asked for.
    bool include_timing = false;
};

// Structured documents (JSON, two-space indent, fixed key order, trailing
// newline). The layout is described in docs/report_schema.md.
std::string training_report_json(const AdaptReport& report, const RunContext& ctx);
std::string chain_report_json(const std::vector<AdaptReport>& reports, const RunContext& ctx);
std::string metrics_report_json(const MetricsReport& metrics, const RunContext& ctx);
std::string grid_report_json(const AblationGrid& grid, const RunContext& ctx);
std::string gradcheck_report_json(const GradcheckReport& report, bool include_timing = false);

// Aligned plain-text tables for terminals.
std::string training_table(const AdaptReport& report);
std::string metrics_table(const MetricsReport& metrics);
std::string grid_table(const AblationGrid& grid);
std::string gradcheck_table(const GradcheckReport& report);

std::string mode_name(AdaptMode mode);
std::string bandwidth_rule_name(BandwidthRule rule);
std::string weight_scaling_name(WeightScaling scaling);

}  // namespace mcrl
