#pragma once

// Hour-by-hour balancing experiment: wind forecast error at one bus creates an
// imbalance; DSOs bid, the TSO clears, DSOs dispatch their responsive loads and
// the hour is settled.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "balmarket/central_market.hpp"
#include "balmarket/grid_model.hpp"
#include "balmarket/local_market.hpp"

namespace balmarket {

inline constexpr int kHoursPerDay = 24;
inline constexpr double kIdleThreshold = 1e-6;  // MW

struct WindHour {
    double forecast = 0.0;  // MW
    double observed = 0.0;  // MW

    bool operator==(const WindHour&) const = default;
};

struct WindScenario {
    std::string description;
    BusId wind_bus = 2;
    std::vector<WindHour> hours;

    bool operator==(const WindScenario&) const = default;
};

struct HourRecord {
    int hour = 0;
    std::vector<double> imbalance;  // MW per bus
    std::vector<SteppedBid> stepped_bids;
    CentralClearingResult clearing;
    std::vector<LocalDispatch> local_dispatches;  // empty for idle hours
    SettlementReport settlement;

    [[nodiscard]] bool idle() const { return local_dispatches.empty(); }
    [[nodiscard]] double total_imbalance() const;
    bool operator==(const HourRecord&) const = default;
};

struct SimulationOptions {
    AggregationMode aggregation = AggregationMode::PassThrough;
    ClearingOptions clearing;
    /// Clears hours on worker threads; results are identical to a serial run.
    bool parallel = false;
};

/// Error raised while processing a specific hour.
class HourError : public std::runtime_error {
public:
    HourError(int hour, const std::string& what);
    [[nodiscard]] int hour() const { return hour_; }

private:
    int hour_;
};

WindScenario parse_scenario(const nlohmann::json& doc);
nlohmann::json scenario_to_json(const WindScenario& scenario);
/// Checks 24 hours, non-negative powers and that the wind bus exists.
std::vector<Violation> validate_scenario(const WindScenario& scenario, const TransmissionNetwork& network);
WindScenario load_scenario(const std::filesystem::path& path, const TransmissionNetwork& network);

/// observed - forecast at the wind bus, zero elsewhere.
std::vector<double> hourly_imbalance(const WindScenario& scenario, int hour, std::size_t bus_count);

HourRecord run_hour(const ValidatedSystem& system, const WindScenario& scenario, int hour,
                    const SimulationOptions& options = {});

std::vector<HourRecord> run_simulation(const ValidatedSystem& system, const WindScenario& scenario,
                                       const SimulationOptions& options = {});

}  // namespace balmarket
