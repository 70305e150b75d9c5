#include "balmarket/power_flow.hpp"

#include <cmath>
#include <numeric>
#include <queue>
#include <string>

#include <Eigen/Dense>

namespace balmarket {

namespace {

constexpr double kBalanceTolerance = 1e-6;  // MW
constexpr double kDerivativeStep = 0.01;     // MW

struct OrientedTree {
    std::vector<NodeId> order;               // breadth-first from the root
    std::map<NodeId, std::size_t> up_branch;  // node -> branch towards the root
};

OrientedTree orient(const Feeder& feeder) {
    std::map<NodeId, std::vector<std::size_t>> incident;
    for (std::size_t b = 0; b < feeder.branches.size(); ++b) {
        incident[feeder.branches[b].from].push_back(b);
        incident[feeder.branches[b].to].push_back(b);
    }
    OrientedTree tree;
    std::map<NodeId, bool> seen{{feeder.root_node, true}};
    std::queue<NodeId> frontier;
    frontier.push(feeder.root_node);
    while (!frontier.empty()) {
        const NodeId node = frontier.front();
        frontier.pop();
        tree.order.push_back(node);
        for (std::size_t b : incident[node]) {
            const auto& br = feeder.branches[b];
            const NodeId other = br.from == node ? br.to : br.from;
            if (seen[other]) {
                if (tree.up_branch.contains(node) && tree.up_branch.at(node) == b) continue;
                throw PowerFlowError("feeder of DSO " + std::to_string(feeder.dso) + " is not radial");
            }
            seen[other] = true;
            tree.up_branch[other] = b;
            frontier.push(other);
        }
    }
    if (tree.order.size() != feeder.nodes.size())
        throw PowerFlowError("feeder of DSO " + std::to_string(feeder.dso) + " has nodes unreachable from the root");
    return tree;
}

FeederState sweep(const Feeder& feeder, const std::map<NodeId, double>& reductions) {
    const OrientedTree tree = orient(feeder);
    FeederState state;
    for (const auto& n : feeder.nodes) {
        auto r = reductions.find(n.node_id);
        state.net_load_p[n.node_id] = n.base_load_p - (r == reductions.end() ? 0.0 : r->second);
        state.net_load_q[n.node_id] = n.base_load_q;
    }

    std::map<NodeId, double> subtree_p = state.net_load_p;
    std::map<NodeId, double> subtree_q = state.net_load_q;
    const std::size_t nb = feeder.branches.size();
    state.branch_flow_p.assign(nb, 0.0);
    state.branch_flow_q.assign(nb, 0.0);
    state.branch_loss.assign(nb, 0.0);

    const double v2 = feeder.nominal_voltage * feeder.nominal_voltage;
    for (auto it = tree.order.rbegin(); it != tree.order.rend(); ++it) {
        const NodeId node = *it;
        auto up = tree.up_branch.find(node);
        if (up == tree.up_branch.end()) continue;  // root
        const std::size_t b = up->second;
        const auto& br = feeder.branches[b];
        const NodeId parent = br.from == node ? br.to : br.from;
        state.branch_flow_p[b] = subtree_p[node];
        state.branch_flow_q[b] = subtree_q[node];
        subtree_p[parent] += subtree_p[node];
        subtree_q[parent] += subtree_q[node];
        const double p = state.branch_flow_p[b];
        const double q = state.branch_flow_q[b];
        state.branch_loss[b] = br.r * (p * p + q * q) / v2;
    }
    state.total_loss = std::accumulate(state.branch_loss.begin(), state.branch_loss.end(), 0.0);
    return state;
}

}  // namespace

AngleSolution solve_dc_angles(const TransmissionNetwork& network, std::span<const double> injections,
                              double power_base, BusId slack_bus) {
    const int n = static_cast<int>(network.buses.size());
    if (static_cast<int>(injections.size()) != n)
        throw PowerFlowError("injection vector has " + std::to_string(injections.size()) + " entries for " +
                             std::to_string(n) + " buses");
    if (slack_bus < 0 || slack_bus >= n) throw PowerFlowError("slack bus " + std::to_string(slack_bus) + " out of range");
    const double total = std::accumulate(injections.begin(), injections.end(), 0.0);
    if (std::abs(total) > kBalanceTolerance)
        throw PowerFlowError("injections are unbalanced by " + std::to_string(total) + " MW");

    auto reduced = [slack_bus](int bus) { return bus < slack_bus ? bus : bus - 1; };
    Eigen::MatrixXd b_matrix = Eigen::MatrixXd::Zero(n - 1, n - 1);
    for (const auto& br : network.branches) {
        const int i = br.from_bus;
        const int j = br.to_bus;
        if (i != slack_bus) b_matrix(reduced(i), reduced(i)) += br.susceptance;
        if (j != slack_bus) b_matrix(reduced(j), reduced(j)) += br.susceptance;
        if (i != slack_bus && j != slack_bus) {
            b_matrix(reduced(i), reduced(j)) -= br.susceptance;
            b_matrix(reduced(j), reduced(i)) -= br.susceptance;
        }
    }
    Eigen::VectorXd p(n - 1);
    for (int bus = 0; bus < n; ++bus)
        if (bus != slack_bus) p(reduced(bus)) = injections[bus] / power_base;

    AngleSolution out;
    out.slack_bus = slack_bus;
    out.angles.assign(n, 0.0);
    if (n == 1) return out;

    Eigen::FullPivLU<Eigen::MatrixXd> lu(b_matrix);
    if (!lu.isInvertible()) throw PowerFlowError("susceptance matrix is singular; the network is disconnected");
    const Eigen::VectorXd theta = lu.solve(p);
    for (int bus = 0; bus < n; ++bus)
        if (bus != slack_bus) out.angles[bus] = theta(reduced(bus));
    return out;
}

FlowVector branch_flows(const TransmissionNetwork& network, const AngleSolution& angles, double power_base) {
    FlowVector flows;
    flows.reserve(network.branches.size());
    for (const auto& br : network.branches)
        flows.push_back(power_base * br.susceptance * (angles.angles.at(br.from_bus) - angles.angles.at(br.to_bus)));
    return flows;
}

std::vector<double> nodal_injections(const TransmissionNetwork& network, std::span<const double> angles,
                                     double power_base) {
    std::vector<double> p(network.buses.size(), 0.0);
    for (const auto& br : network.branches) {
        const double f = power_base * br.susceptance * (angles[br.from_bus] - angles[br.to_bus]);
        p[br.from_bus] += f;
        p[br.to_bus] -= f;
    }
    return p;
}

FeederState feeder_loss(const Feeder& feeder, const std::map<NodeId, double>& rl_reductions) {
    for (const auto& [node, mw] : rl_reductions) {
        const FeederNode* fn = feeder.find_node(node);
        if (fn == nullptr)
            throw std::invalid_argument("node " + std::to_string(node) + " is not on the feeder of DSO " +
                                        std::to_string(feeder.dso));
        if (mw < 0.0 || mw > fn->base_load_p + 1e-9)
            throw std::invalid_argument("reduction of " + std::to_string(mw) + " MW at node " + std::to_string(node) +
                                        " is outside [0, base load " + std::to_string(fn->base_load_p) + "]");
    }
    return sweep(feeder, rl_reductions);
}

std::vector<std::size_t> path_to_root(const Feeder& feeder, NodeId node) {
    if (feeder.find_node(node) == nullptr)
        throw std::invalid_argument("node " + std::to_string(node) + " is not on the feeder of DSO " +
                                    std::to_string(feeder.dso));
    const OrientedTree tree = orient(feeder);
    std::vector<std::size_t> path;
    for (auto up = tree.up_branch.find(node); up != tree.up_branch.end(); up = tree.up_branch.find(node)) {
        path.push_back(up->second);
        const auto& br = feeder.branches[up->second];
        node = br.from == node ? br.to : br.from;
    }
    return path;
}

double marginal_loss_saving(const Feeder& feeder, NodeId node, const std::map<NodeId, double>& base_reductions) {
    if (feeder.find_node(node) == nullptr)
        throw std::invalid_argument("node " + std::to_string(node) + " is not on the feeder of DSO " +
                                    std::to_string(feeder.dso));
    auto less = base_reductions;
    auto more = base_reductions;
    less[node] -= kDerivativeStep;
    more[node] += kDerivativeStep;
    // The derivative may step just outside the admissible range, so skip the range check.
    return (sweep(feeder, less).total_loss - sweep(feeder, more).total_loss) / (2.0 * kDerivativeStep);
}

}  // namespace balmarket
