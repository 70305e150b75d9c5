#pragma once

// Result emission and the command-line entry points.
//
// Output directory layout written by `simulate`:
//   results.json          every HourRecord
//   bids_fig5.csv         hour,dso,step,quantity_mw,price,rl_ids
//   dispatch_fig6.csv     hour,participant,kind,quantity_mw,payment (one row per participant-hour)
//   rl_dispatch_fig7.csv  hour,dso,rl_id,node,reduction_mw (one row per RL-hour)
//   summary.json          totals and the responsive-load vs conventional comparison

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "balmarket/scenario.hpp"

namespace balmarket {

nlohmann::json record_to_json(const HourRecord& record);
HourRecord record_from_json(const nlohmann::json& doc);

nlohmann::json results_to_json(const std::vector<HourRecord>& records);
std::vector<HourRecord> results_from_json(const nlohmann::json& doc);

/// Fixed six-decimal rendering used by every CSV; tiny magnitudes print as 0.
std::string format_fixed(double value);

std::string bids_csv(const std::vector<HourRecord>& records);
std::string dispatch_csv(const std::vector<HourRecord>& records, const ValidatedSystem& system);
std::string rl_dispatch_csv(const std::vector<HourRecord>& records, const ValidatedSystem& system);

struct DsoSummary {
    DsoId dso = 0;
    double cleared_mw = 0.0;
    double revenue = 0.0;
    double profit = 0.0;
    int hours_selected = 0;
};

struct RunSummary {
    int hours = 0;
    int active_hours = 0;
    double total_tso_cost = 0.0;
    double total_slack_cost = 0.0;
    double total_conventional_cost = 0.0;
    double generator_down_mw = 0.0;
    double responsive_up_mw = 0.0;
    std::vector<DsoSummary> dsos;
    CheaperOption cheaper_option = CheaperOption::ResponsiveLoads;
};

RunSummary summarize(const std::vector<HourRecord>& records, const ValidatedSystem& system);
nlohmann::json summary_to_json(const RunSummary& summary);

struct RunArtifacts {
    std::filesystem::path results;
    std::filesystem::path bids_csv;
    std::filesystem::path dispatch_csv;
    std::filesystem::path rl_dispatch_csv;
    std::filesystem::path summary_json;
    RunSummary summary;
};

RunArtifacts write_artifacts(const std::vector<HourRecord>& records, const ValidatedSystem& system,
                             const std::filesystem::path& out_dir);

/// Exit codes: 0 success, 1 I/O failure, 2 usage or validation failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitIo = 1;
inline constexpr int kExitInvalid = 2;

/// `args` excludes the program name; args[0] is the subcommand
/// (`simulate` or `clear-hour`).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace balmarket
