#pragma once

// DC power flow on the transmission network and the simplified one-pass loss
// estimate on radial feeders.

#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include "balmarket/grid_model.hpp"

namespace balmarket {

/// Raised for unbalanced injections or a singular (disconnected) network.
class PowerFlowError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct AngleSolution {
    std::vector<double> angles;  // rad, indexed by bus id
    BusId slack_bus = 0;
};

/// Per-branch real power in MW, from_bus -> to_bus positive.
using FlowVector = std::vector<double>;

inline constexpr BusId kDefaultSlackBus = 1;

/// Solves B' theta = P / base with the slack row and column removed.
/// `injections` are MW per bus and must sum to zero within 1e-6 MW.
AngleSolution solve_dc_angles(const TransmissionNetwork& network, std::span<const double> injections,
                              double power_base, BusId slack_bus = kDefaultSlackBus);

FlowVector branch_flows(const TransmissionNetwork& network, const AngleSolution& angles, double power_base);

/// Net MW leaving each bus through branches, computed from angles.
std::vector<double> nodal_injections(const TransmissionNetwork& network, std::span<const double> angles,
                                     double power_base);

struct FeederState {
    std::map<NodeId, double> net_load_p;  // MW
    std::map<NodeId, double> net_load_q;  // MVAr
    std::vector<double> branch_flow_p;    // MW, aligned with feeder.branches
    std::vector<double> branch_flow_q;    // MVAr
    std::vector<double> branch_loss;      // MW
    double total_loss = 0.0;              // MW
};

/// One backward sweep at nominal voltage. Loss per branch is
/// r (P^2 + Q^2) / V^2 with r in ohm, P in MW, Q in MVAr, V in kV.
/// Reductions must lie in [0, base load] of a node of this feeder.
FeederState feeder_loss(const Feeder& feeder, const std::map<NodeId, double>& rl_reductions = {});

/// Indices into feeder.branches on the path from `node` up to the root.
std::vector<std::size_t> path_to_root(const Feeder& feeder, NodeId node);

/// d(total loss)/d(reduction at node), negated, by central difference with a
/// 0.01 MW step around `base_reductions`.
double marginal_loss_saving(const Feeder& feeder, NodeId node,
                            const std::map<NodeId, double>& base_reductions = {});

}  // namespace balmarket
