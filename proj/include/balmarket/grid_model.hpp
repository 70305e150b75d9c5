#pragma once

// Network and market data for the balancing-market simulator: the transmission
// case, the radial distribution feeders behind each DSO, responsive-load offers
// and market parameters. Everything here is plain data; `validate_system`
// reports invariant violations and `load_dataset` refuses systems that have any.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace balmarket {

using BusId = int;
using DsoId = int;
using NodeId = int;

struct Bus {
    BusId id = 0;
    std::string name;
    double scheduled_injection = 0.0;  // MW, day-ahead

    bool operator==(const Bus&) const = default;
};

struct Branch {
    int id = 0;
    BusId from_bus = 0;
    BusId to_bus = 0;
    double susceptance = 0.0;  // per unit
    double flow_limit = 0.0;   // MW

    bool operator==(const Branch&) const = default;
};

/// Controllable transmission generator offering regulation in [reg_min, reg_max].
/// Both directions are paid at `price`.
struct Generator {
    std::string id;
    BusId bus = 0;
    double reg_min = 0.0;  // MW, <= 0
    double reg_max = 0.0;  // MW, >= 0
    double price = 0.0;    // currency/MWh

    bool operator==(const Generator&) const = default;
};

/// Interconnection between a transmission bus and one DSO's feeder.
struct TieLine {
    int id = 0;
    BusId transmission_bus = 0;
    DsoId dso = 0;
    double flow_limit = 0.0;  // MW, bounds the balancing exchange

    bool operator==(const TieLine&) const = default;
};

struct TransmissionNetwork {
    std::string description;
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<Generator> generators;
    std::vector<TieLine> ties;

    [[nodiscard]] const TieLine* tie_for(DsoId dso) const;
    bool operator==(const TransmissionNetwork&) const = default;
};

struct FeederNode {
    NodeId node_id = 0;
    double base_load_p = 0.0;  // MW
    double base_load_q = 0.0;  // MVAr

    bool operator==(const FeederNode&) const = default;
};

struct FeederBranch {
    NodeId from = 0;
    NodeId to = 0;
    double r = 0.0;  // ohm
    double x = 0.0;  // ohm

    bool operator==(const FeederBranch&) const = default;
};

struct Feeder {
    DsoId dso = 0;
    std::string description;
    std::vector<FeederNode> nodes;
    std::vector<FeederBranch> branches;
    double nominal_voltage = 1.0;  // kV line-to-line
    NodeId root_node = 0;
    std::vector<NodeId> responsive_nodes;  // nodes equipped for responsive load

    [[nodiscard]] const FeederNode* find_node(NodeId id) const;
    bool operator==(const Feeder&) const = default;
};

/// Offer of a responsive load to reduce consumption between floor and quantity.
struct ResponsiveLoadBid {
    std::string id;
    DsoId dso = 0;
    NodeId feeder_node = 0;
    double quantity = 0.0;  // MW
    double floor = 0.0;     // MW
    double price = 0.0;     // currency/MWh

    bool operator==(const ResponsiveLoadBid&) const = default;
};

enum class SettlementMode { PayAsBid, Uniform };

struct MarketConfig {
    std::string description;
    double penalty_price = 1000.0;     // currency/MWh for the recourse slack
    double conventional_cost = 120.0;  // currency/h
    double loss_price = 10.0;          // currency/MWh
    SettlementMode settlement_mode = SettlementMode::PayAsBid;
    double power_base = 100.0;  // MVA

    bool operator==(const MarketConfig&) const = default;
};

struct ValidatedSystem {
    TransmissionNetwork network;
    std::vector<Feeder> feeders;  // ascending dso id
    std::vector<ResponsiveLoadBid> bids;
    MarketConfig config;

    [[nodiscard]] std::vector<DsoId> dso_ids() const;
    [[nodiscard]] const Feeder& feeder(DsoId dso) const;
    [[nodiscard]] std::vector<ResponsiveLoadBid> bids_of(DsoId dso) const;

    bool operator==(const ValidatedSystem&) const = default;
};

struct Violation {
    std::string code;
    std::string message;

    bool operator==(const Violation&) const = default;
};

/// Malformed input: unreadable JSON, missing or mistyped field.
class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File could not be opened or written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Well-formed input that breaks one or more data invariants.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(std::vector<Violation> violations);
    [[nodiscard]] const std::vector<Violation>& violations() const { return violations_; }

private:
    std::vector<Violation> violations_;
};

std::vector<Violation> validate_network(const TransmissionNetwork& network);
std::vector<Violation> validate_feeder(const Feeder& feeder);
std::vector<Violation> validate_system(const ValidatedSystem& system);

std::string to_string(SettlementMode mode);
SettlementMode settlement_mode_from_string(const std::string& text);

}  // namespace balmarket
