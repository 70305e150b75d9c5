#include "balmarket/grid_model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <iterator>
#include <sstream>
#include <utility>

namespace balmarket {

namespace {

constexpr double kScheduleTolerance = 1e-6;

std::string join_messages(const std::vector<Violation>& violations) {
    std::ostringstream out;
    out << violations.size() << " validation violation(s)";
    for (const auto& v : violations) out << "\n  [" << v.code << "] " << v.message;
    return out.str();
}

template <typename... Parts>
std::string cat(const Parts&... parts) {
    std::ostringstream out;
    (out << ... << parts);
    return out.str();
}

// Union-find over arbitrary integer keys.
class Components {
public:
    void add(int key) { parent_.try_emplace(key, key); }
    int find(int key) {
        int root = key;
        while (parent_.at(root) != root) root = parent_.at(root);
        while (parent_.at(key) != root) key = std::exchange(parent_.at(key), root);
        return root;
    }
    // Returns false when both keys were already connected.
    bool unite(int a, int b) {
        const int ra = find(a);
        const int rb = find(b);
        if (ra == rb) return false;
        parent_[std::max(ra, rb)] = std::min(ra, rb);
        return true;
    }

private:
    std::map<int, int> parent_;
};

}  // namespace

ValidationError::ValidationError(std::vector<Violation> violations)
    : std::runtime_error(join_messages(violations)), violations_(std::move(violations)) {}

const TieLine* TransmissionNetwork::tie_for(DsoId dso) const {
    auto it = std::find_if(ties.begin(), ties.end(), [dso](const TieLine& t) { return t.dso == dso; });
    return it == ties.end() ? nullptr : &*it;
}

const FeederNode* Feeder::find_node(NodeId id) const {
    auto it = std::find_if(nodes.begin(), nodes.end(), [id](const FeederNode& n) { return n.node_id == id; });
    return it == nodes.end() ? nullptr : &*it;
}

std::vector<DsoId> ValidatedSystem::dso_ids() const {
    std::set<DsoId> ids;
    for (const auto& tie : network.ties) ids.insert(tie.dso);
    return {ids.begin(), ids.end()};
}

const Feeder& ValidatedSystem::feeder(DsoId dso) const {
    for (const auto& f : feeders)
        if (f.dso == dso) return f;
    throw std::out_of_range(cat("no feeder for DSO ", dso));
}

std::vector<ResponsiveLoadBid> ValidatedSystem::bids_of(DsoId dso) const {
    std::vector<ResponsiveLoadBid> out;
    std::copy_if(bids.begin(), bids.end(), std::back_inserter(out),
                 [dso](const ResponsiveLoadBid& b) { return b.dso == dso; });
    return out;
}

std::vector<Violation> validate_network(const TransmissionNetwork& network) {
    std::vector<Violation> out;
    const int n = static_cast<int>(network.buses.size());

    if (n == 0) out.push_back({"no-buses", "network has no buses"});
    for (int i = 0; i < n; ++i) {
        if (network.buses[i].id != i)
            out.push_back({"bus-ids", cat("bus at position ", i, " has id ", network.buses[i].id,
                                          "; ids must be contiguous from 0")});
    }
    const double schedule = std::accumulate(network.buses.begin(), network.buses.end(), 0.0,
                                            [](double s, const Bus& b) { return s + b.scheduled_injection; });
    if (std::abs(schedule) > kScheduleTolerance)
        out.push_back({"schedule-imbalance", cat("scheduled injections sum to ", schedule, " MW")});

    auto valid_bus = [n](BusId id) { return id >= 0 && id < n; };
    Components components;
    for (int i = 0; i < n; ++i) components.add(i);
    for (const auto& br : network.branches) {
        if (!valid_bus(br.from_bus) || !valid_bus(br.to_bus)) {
            out.push_back({"branch-bus", cat("branch ", br.id, " references an unknown bus")});
            continue;
        }
        if (br.from_bus == br.to_bus)
            out.push_back({"branch-self-loop", cat("branch ", br.id, " connects bus ", br.from_bus, " to itself")});
        if (!(br.susceptance > 0.0))
            out.push_back({"branch-susceptance", cat("branch ", br.id, " susceptance must be > 0")});
        if (!(br.flow_limit > 0.0))
            out.push_back({"branch-limit", cat("branch ", br.id, " flow limit must be > 0")});
        components.unite(br.from_bus, br.to_bus);
    }
    for (int i = 1; i < n; ++i) {
        if (components.find(i) != components.find(0)) {
            out.push_back({"disconnected", cat("bus ", i, " is not connected to bus 0")});
            break;
        }
    }

    std::set<std::string> gen_ids;
    for (const auto& g : network.generators) {
        if (!gen_ids.insert(g.id).second) out.push_back({"gen-duplicate", cat("duplicate generator id ", g.id)});
        if (!valid_bus(g.bus)) out.push_back({"gen-bus", cat("generator ", g.id, " references unknown bus ", g.bus)});
        if (!(g.reg_min <= 0.0 && 0.0 <= g.reg_max))
            out.push_back({"gen-range", cat("generator ", g.id, " needs reg_min <= 0 <= reg_max, got [", g.reg_min,
                                            ", ", g.reg_max, "]")});
        if (!(g.price >= 0.0)) out.push_back({"gen-price", cat("generator ", g.id, " price must be >= 0")});
    }

    std::set<DsoId> tie_dsos;
    for (const auto& t : network.ties) {
        if (!tie_dsos.insert(t.dso).second)
            out.push_back({"tie-duplicate-dso", cat("DSO ", t.dso, " is attached by more than one tie")});
        if (!valid_bus(t.transmission_bus))
            out.push_back({"tie-bus", cat("tie ", t.id, " references unknown bus ", t.transmission_bus)});
        if (!(t.flow_limit > 0.0)) out.push_back({"tie-limit", cat("tie ", t.id, " flow limit must be > 0")});
    }
    return out;
}

std::vector<Violation> validate_feeder(const Feeder& feeder) {
    std::vector<Violation> out;
    const std::string who = cat("feeder of DSO ", feeder.dso);

    std::set<NodeId> ids;
    for (const auto& node : feeder.nodes) {
        if (!ids.insert(node.node_id).second)
            out.push_back({"feeder-duplicate-node", cat(who, ": duplicate node ", node.node_id)});
        if (!(node.base_load_p >= 0.0))
            out.push_back({"feeder-load", cat(who, ": node ", node.node_id, " has negative base load")});
    }
    if (!ids.contains(feeder.root_node))
        out.push_back({"feeder-root", cat(who, ": root node ", feeder.root_node, " is not a node")});
    if (!(feeder.nominal_voltage > 0.0))
        out.push_back({"feeder-voltage", cat(who, ": nominal voltage must be > 0")});

    Components components;
    for (NodeId id : ids) components.add(id);
    bool endpoints_ok = true;
    for (const auto& br : feeder.branches) {
        if (!ids.contains(br.from) || !ids.contains(br.to)) {
            out.push_back({"dangling-reference",
                           cat(who, ": branch ", br.from, "-", br.to, " references an unknown node")});
            endpoints_ok = false;
            continue;
        }
        if (!(br.r >= 0.0))
            out.push_back({"feeder-resistance", cat(who, ": branch ", br.from, "-", br.to, " has r < 0")});
        if (!components.unite(br.from, br.to))
            out.push_back({"non-radial", cat(who, ": branch ", br.from, "-", br.to, " closes a loop")});
    }
    if (endpoints_ok && ids.contains(feeder.root_node)) {
        for (NodeId id : ids) {
            if (components.find(id) != components.find(feeder.root_node))
                out.push_back({"feeder-unreachable", cat(who, ": node ", id, " is not reachable from the root")});
        }
    }
    for (NodeId id : feeder.responsive_nodes) {
        if (!ids.contains(id))
            out.push_back({"dangling-reference", cat(who, ": responsive node ", id, " is not a feeder node")});
    }
    return out;
}

std::vector<Violation> validate_system(const ValidatedSystem& system) {
    std::vector<Violation> out = validate_network(system.network);

    const auto& cfg = system.config;
    if (!(cfg.loss_price >= 0.0)) out.push_back({"loss-price", "loss_price must be >= 0"});
    if (!(cfg.power_base > 0.0)) out.push_back({"power-base", "power_base must be > 0"});
    double max_price = 0.0;
    for (const auto& g : system.network.generators) max_price = std::max(max_price, g.price);
    for (const auto& b : system.bids) max_price = std::max(max_price, b.price);
    if (!(cfg.penalty_price > max_price))
        out.push_back({"penalty-price", cat("penalty_price ", cfg.penalty_price,
                                            " must exceed every offer price (max ", max_price, ")")});

    std::set<DsoId> feeder_dsos;
    for (const auto& f : system.feeders) {
        if (!feeder_dsos.insert(f.dso).second)
            out.push_back({"feeder-duplicate", cat("more than one feeder for DSO ", f.dso)});
        if (system.network.tie_for(f.dso) == nullptr)
            out.push_back({"unknown-dso", cat("feeder for DSO ", f.dso, " has no tie line")});
        auto fv = validate_feeder(f);
        out.insert(out.end(), fv.begin(), fv.end());
    }
    for (const auto& t : system.network.ties) {
        if (!feeder_dsos.contains(t.dso)) out.push_back({"missing-feeder", cat("no feeder file for DSO ", t.dso)});
    }

    std::set<std::string> bid_ids;
    std::map<std::pair<DsoId, NodeId>, double> offered_at_node;
    for (const auto& b : system.bids) {
        if (!bid_ids.insert(b.id).second) out.push_back({"bid-duplicate", cat("duplicate bid id ", b.id)});
        if (!(0.0 <= b.floor && b.floor <= b.quantity))
            out.push_back({"bid-range", cat("bid ", b.id, " needs 0 <= floor <= quantity")});
        if (!(b.price >= 0.0)) out.push_back({"bid-price", cat("bid ", b.id, " price must be >= 0")});
        if (system.network.tie_for(b.dso) == nullptr) {
            out.push_back({"unknown-dso", cat("bid ", b.id, " references unknown DSO ", b.dso)});
            continue;
        }
        auto f = std::find_if(system.feeders.begin(), system.feeders.end(),
                              [&](const Feeder& fd) { return fd.dso == b.dso; });
        if (f == system.feeders.end()) continue;
        const FeederNode* node = f->find_node(b.feeder_node);
        if (node == nullptr) {
            out.push_back({"dangling-reference",
                           cat("bid ", b.id, " references node ", b.feeder_node, " absent from DSO ", b.dso,
                               "'s feeder")});
            continue;
        }
        if (!f->responsive_nodes.empty() &&
            std::find(f->responsive_nodes.begin(), f->responsive_nodes.end(), b.feeder_node) ==
                f->responsive_nodes.end())
            out.push_back({"rl-node", cat("bid ", b.id, " sits at node ", b.feeder_node,
                                          " which is not a responsive node")});
        double& offered = offered_at_node[{b.dso, b.feeder_node}];
        offered += b.quantity;
        if (offered > node->base_load_p + 1e-9)
            out.push_back({"bid-exceeds-load", cat("offers at node ", b.feeder_node, " of DSO ", b.dso, " total ",
                                                   offered, " MW above its base load ", node->base_load_p, " MW")});
    }
    return out;
}

std::string to_string(SettlementMode mode) {
    return mode == SettlementMode::PayAsBid ? "pay-as-bid" : "uniform";
}

SettlementMode settlement_mode_from_string(const std::string& text) {
    if (text == "pay-as-bid") return SettlementMode::PayAsBid;
    if (text == "uniform") return SettlementMode::Uniform;
    throw SchemaError("settlement_mode must be \"pay-as-bid\" or \"uniform\", got \"" + text + "\"");
}

}  // namespace balmarket
