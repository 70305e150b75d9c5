#include "balmarket/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>

#include "balmarket/dataset_io.hpp"

namespace balmarket {

HourError::HourError(int hour, const std::string& what)
    : std::runtime_error("hour " + std::to_string(hour) + ": " + what), hour_(hour) {}

double HourRecord::total_imbalance() const {
    return std::accumulate(imbalance.begin(), imbalance.end(), 0.0);
}

WindScenario parse_scenario(const nlohmann::json& doc) {
    if (!doc.is_object()) throw SchemaError("scenario: expected an object");
    WindScenario s;
    try {
        if (doc.contains("description")) s.description = doc.at("description").get<std::string>();
        s.wind_bus = doc.at("wind_bus").get<int>();
        const auto& hours = doc.at("hours");
        if (!hours.is_array()) throw SchemaError("scenario.hours: expected an array");
        for (const auto& h : hours)
            s.hours.push_back({h.at("forecast").get<double>(), h.at("observed").get<double>()});
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("scenario: ") + e.what());
    }
    return s;
}

nlohmann::json scenario_to_json(const WindScenario& scenario) {
    nlohmann::json doc = nlohmann::json::object();
    if (!scenario.description.empty()) doc["description"] = scenario.description;
    doc["wind_bus"] = scenario.wind_bus;
    doc["hours"] = nlohmann::json::array();
    for (const auto& h : scenario.hours) doc["hours"].push_back({{"forecast", h.forecast}, {"observed", h.observed}});
    return doc;
}

std::vector<Violation> validate_scenario(const WindScenario& scenario, const TransmissionNetwork& network) {
    std::vector<Violation> out;
    if (scenario.hours.size() != kHoursPerDay)
        out.push_back({"scenario-hours", "scenario has " + std::to_string(scenario.hours.size()) + " hours, expected " +
                                             std::to_string(kHoursPerDay)});
    if (scenario.wind_bus < 0 || scenario.wind_bus >= static_cast<int>(network.buses.size()))
        out.push_back({"scenario-bus", "wind bus " + std::to_string(scenario.wind_bus) + " is not a network bus"});
    for (std::size_t h = 0; h < scenario.hours.size(); ++h) {
        if (!(scenario.hours[h].forecast >= 0.0 && scenario.hours[h].observed >= 0.0))
            out.push_back({"scenario-power", "hour " + std::to_string(h) + " has a negative wind power"});
    }
    return out;
}

WindScenario load_scenario(const std::filesystem::path& path, const TransmissionNetwork& network) {
    WindScenario s = parse_scenario(read_json_file(path));
    auto violations = validate_scenario(s, network);
    if (!violations.empty()) throw ValidationError(std::move(violations));
    return s;
}

std::vector<double> hourly_imbalance(const WindScenario& scenario, int hour, std::size_t bus_count) {
    if (hour < 0 || hour >= static_cast<int>(scenario.hours.size()))
        throw std::out_of_range("hour " + std::to_string(hour) + " outside [0, " +
                                std::to_string(scenario.hours.size()) + ")");
    std::vector<double> out(bus_count, 0.0);
    const auto& h = scenario.hours[hour];
    out.at(scenario.wind_bus) = h.observed - h.forecast;
    return out;
}

HourRecord run_hour(const ValidatedSystem& system, const WindScenario& scenario, int hour,
                    const SimulationOptions& options) {
    HourRecord rec;
    rec.hour = hour;
    try {
        rec.imbalance = hourly_imbalance(scenario, hour, system.network.buses.size());
        const auto& cfg = system.config;

        const bool idle = std::all_of(rec.imbalance.begin(), rec.imbalance.end(),
                                      [](double v) { return std::abs(v) < kIdleThreshold; });
        if (idle) std::fill(rec.imbalance.begin(), rec.imbalance.end(), 0.0);

        // no balancing need, so DSOs are not asked to bid
        if (!idle) {
            for (DsoId dso : system.dso_ids()) {
                const auto bids = system.bids_of(dso);
                rec.stepped_bids.push_back(
                    aggregate_bids(dso, bids, options.aggregation, system.feeder(dso), cfg.loss_price));
            }
        }

        rec.clearing = clear_central(system.network, rec.stepped_bids, rec.imbalance, cfg, options.clearing);
        if (rec.clearing.status != lp::Status::Optimal)
            throw std::runtime_error("central market is " + lp::to_string(rec.clearing.status));
        // the balance dual is degenerate when nothing is traded
        if (idle) rec.clearing.marginal_price = 0.0;

        if (!idle) {
            for (const auto& acc : rec.clearing.dsos) {
                const auto bids = system.bids_of(acc.dso);
                rec.local_dispatches.push_back(
                    dispatch_local(acc.dso, acc.total, bids, system.feeder(acc.dso), cfg.loss_price));
            }
        }
        rec.settlement = settle(rec.clearing, system.network, rec.stepped_bids, cfg, rec.local_dispatches);
    } catch (const HourError&) {
        throw;
    } catch (const std::exception& e) {
        throw HourError(hour, e.what());
    }
    return rec;
}

std::vector<HourRecord> run_simulation(const ValidatedSystem& system, const WindScenario& scenario,
                                       const SimulationOptions& options) {
    const int hours = static_cast<int>(scenario.hours.size());
    std::vector<HourRecord> records;
    records.reserve(hours);
    if (!options.parallel) {
        for (int h = 0; h < hours; ++h) records.push_back(run_hour(system, scenario, h, options));
        return records;
    }
    std::vector<std::future<HourRecord>> pending;
    for (int h = 0; h < hours; ++h)
        pending.push_back(std::async(std::launch::async, [&, h] { return run_hour(system, scenario, h, options); }));
    for (auto& f : pending) records.push_back(f.get());
    return records;
}

}  // namespace balmarket
