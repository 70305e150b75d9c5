#include "balmarket/central_market.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "balmarket/power_flow.hpp"

namespace balmarket {

namespace {

using lp::kInfinity;
using lp::Term;

struct StepColumn {
    std::size_t dso_index = 0;
    std::size_t step = 0;
    int column = 0;
};

struct ClearingModel {
    lp::LinearProgram program;
    std::vector<int> angle;
    std::vector<int> flow;
    std::vector<int> gen_up;
    std::vector<int> gen_down;
    std::vector<StepColumn> steps;  // (dso id, step index) order
    std::vector<int> tie;           // per stepped bid
    int slack_up = -1;
    int slack_down = -1;
    std::vector<int> balance_row;  // per bus
};

ClearingModel build(const TransmissionNetwork& net, std::span<const SteppedBid> bids,
                    std::span<const double> imbalance, const MarketConfig& cfg, const ClearingOptions& opt,
                    BusId reference, BusId recourse) {
    ClearingModel m;
    auto& p = m.program;
    const int nbus = static_cast<int>(net.buses.size());

    for (int i = 0; i < nbus; ++i) {
        const double bound = i == reference ? 0.0 : kInfinity;
        m.angle.push_back(p.add_variable(0.0, -bound, bound));
    }
    for (const auto& br : net.branches) {
        const double limit = opt.relax_line_limits ? kInfinity : br.flow_limit;
        m.flow.push_back(p.add_variable(0.0, -limit, limit));
    }
    for (const auto& g : net.generators) {
        m.gen_up.push_back(p.add_variable(g.price, 0.0, g.reg_max));
        m.gen_down.push_back(p.add_variable(g.price, 0.0, -g.reg_min));
    }
    for (std::size_t d = 0; d < bids.size(); ++d) {
        for (std::size_t s = 0; s < bids[d].steps.size(); ++s) {
            const auto& step = bids[d].steps[s];
            m.steps.push_back({d, s, p.add_variable(step.price, 0.0, step.quantity)});
        }
    }
    std::stable_sort(m.steps.begin(), m.steps.end(), [&](const StepColumn& a, const StepColumn& b) {
        if (bids[a.dso_index].dso != bids[b.dso_index].dso) return bids[a.dso_index].dso < bids[b.dso_index].dso;
        return a.step < b.step;
    });
    for (const auto& bid : bids) {
        const TieLine* t = net.tie_for(bid.dso);
        m.tie.push_back(p.add_variable(0.0, -t->flow_limit, t->flow_limit));
    }
    const double slack_bound = opt.enable_slack ? kInfinity : 0.0;
    m.slack_up = p.add_variable(cfg.penalty_price, 0.0, slack_bound);
    m.slack_down = p.add_variable(cfg.penalty_price, 0.0, slack_bound);

    std::vector<std::vector<Term>> balance(nbus);
    for (std::size_t g = 0; g < net.generators.size(); ++g) {
        balance[net.generators[g].bus].push_back({m.gen_up[g], 1.0});
        balance[net.generators[g].bus].push_back({m.gen_down[g], -1.0});
    }
    balance[recourse].push_back({m.slack_up, 1.0});
    balance[recourse].push_back({m.slack_down, -1.0});
    for (std::size_t l = 0; l < net.branches.size(); ++l) {
        balance[net.branches[l].from_bus].push_back({m.flow[l], -1.0});
        balance[net.branches[l].to_bus].push_back({m.flow[l], 1.0});
    }
    for (std::size_t d = 0; d < bids.size(); ++d)
        balance[net.tie_for(bids[d].dso)->transmission_bus].push_back({m.tie[d], -1.0});
    for (int i = 0; i < nbus; ++i)
        m.balance_row.push_back(p.add_row(balance[i], -(net.buses[i].scheduled_injection + imbalance[i])));

    for (std::size_t l = 0; l < net.branches.size(); ++l) {
        const auto& br = net.branches[l];
        const double k = cfg.power_base * br.susceptance;
        p.add_row({{m.flow[l], 1.0}, {m.angle[br.from_bus], -k}, {m.angle[br.to_bus], k}}, 0.0);
    }
    for (std::size_t d = 0; d < bids.size(); ++d) {
        std::vector<Term> coupling{{m.tie[d], 1.0}};
        for (const auto& sc : m.steps)
            if (sc.dso_index == d) coupling.push_back({sc.column, 1.0});
        p.add_row(std::move(coupling), 0.0);
    }
    return m;
}

// Among cost-optimal clearings, accept equal-priced steps in (dso id, step)
// order: each step in turn is maximized with the cost held at its optimum and
// then frozen.
lp::LpSolution break_ties(ClearingModel& m, const lp::LpSolution& first) {
    auto& p = m.program;
    const std::vector<double> cost = p.objective;
    const double cap = first.objective_value;

    std::vector<Term> cost_row;
    for (int j = 0; j < p.num_variables(); ++j)
        if (cost[j] != 0.0) cost_row.push_back({j, cost[j]});
    const int cost_slack = p.add_variable(0.0, 0.0, kInfinity);
    cost_row.push_back({cost_slack, 1.0});
    p.add_row(std::move(cost_row), cap);

    lp::LpSolution current = first;
    current.values.push_back(0.0);
    for (const auto& sc : m.steps) {
        std::fill(p.objective.begin(), p.objective.end(), 0.0);
        p.objective[sc.column] = -1.0;
        lp::LpSolution next = lp::solve(p);
        if (next.status != lp::Status::Optimal) break;
        const double v = std::clamp(next.values[sc.column], p.lower[sc.column], p.upper[sc.column]);
        p.lower[sc.column] = v;
        p.upper[sc.column] = v;
        current = std::move(next);
    }
    return current;
}

}  // namespace

const DsoAcceptance* CentralClearingResult::dso(DsoId id) const {
    auto it = std::find_if(dsos.begin(), dsos.end(), [id](const DsoAcceptance& d) { return d.dso == id; });
    return it == dsos.end() ? nullptr : &*it;
}

BusId recourse_bus(std::span<const double> imbalance, BusId reference) {
    BusId best = reference;
    double largest = 0.0;
    for (std::size_t i = 0; i < imbalance.size(); ++i) {
        if (std::abs(imbalance[i]) > largest) {
            largest = std::abs(imbalance[i]);
            best = static_cast<BusId>(i);
        }
    }
    return best;
}

CentralClearingResult clear_central(const TransmissionNetwork& network, std::span<const SteppedBid> stepped_bids,
                                    std::span<const double> imbalance, const MarketConfig& config,
                                    const ClearingOptions& options) {
    const int nbus = static_cast<int>(network.buses.size());
    if (static_cast<int>(imbalance.size()) != nbus)
        throw std::invalid_argument("imbalance vector has " + std::to_string(imbalance.size()) + " entries for " +
                                    std::to_string(nbus) + " buses");
    for (const auto& bid : stepped_bids) {
        if (network.tie_for(bid.dso) == nullptr)
            throw std::invalid_argument("stepped bid from DSO " + std::to_string(bid.dso) + " which has no tie line");
        for (std::size_t s = 1; s < bid.steps.size(); ++s)
            if (bid.steps[s].price < bid.steps[s - 1].price)
                throw std::invalid_argument("stepped bid of DSO " + std::to_string(bid.dso) +
                                            " has decreasing prices");
    }

    const BusId reference = nbus > kDefaultSlackBus ? kDefaultSlackBus : 0;
    const BusId recourse = recourse_bus(imbalance, reference);
    ClearingModel model = build(network, stepped_bids, imbalance, config, options, reference, recourse);

    CentralClearingResult out;
    out.imbalance.assign(imbalance.begin(), imbalance.end());
    out.recourse_bus = recourse;

    const lp::LpSolution first = lp::solve(model.program);
    out.status = first.status;
    if (first.status != lp::Status::Optimal) return out;
    out.marginal_price = first.duals.at(model.balance_row[recourse]);

    const std::vector<double> cost = model.program.objective;
    const lp::LpSolution final = options.lexicographic_ties ? break_ties(model, first) : first;
    const auto& x = final.values;

    out.objective = 0.0;
    for (std::size_t j = 0; j < cost.size(); ++j) out.objective += cost[j] * x[j];

    for (int a : model.angle) out.angles.push_back(x[a]);
    for (int f : model.flow) out.flows.push_back(x[f]);
    for (std::size_t g = 0; g < network.generators.size(); ++g)
        out.generator_regulation.push_back(x[model.gen_up[g]] - x[model.gen_down[g]]);
    out.slack_up = x[model.slack_up];
    out.slack_down = x[model.slack_down];

    for (std::size_t d = 0; d < stepped_bids.size(); ++d) {
        DsoAcceptance acc;
        acc.dso = stepped_bids[d].dso;
        acc.bus = network.tie_for(acc.dso)->transmission_bus;
        acc.steps.assign(stepped_bids[d].steps.size(), 0.0);
        for (const auto& sc : model.steps)
            if (sc.dso_index == d) acc.steps[sc.step] = x[sc.column];
        for (double v : acc.steps) acc.total += v;
        acc.tie_flow = x[model.tie[d]];
        out.dsos.push_back(std::move(acc));
    }
    std::stable_sort(out.dsos.begin(), out.dsos.end(),
                     [](const DsoAcceptance& a, const DsoAcceptance& b) { return a.dso < b.dso; });
    return out;
}

std::string to_string(CheaperOption option) {
    return option == CheaperOption::ResponsiveLoads ? "RL" : "conventional";
}

SettlementReport settle(const CentralClearingResult& result, const TransmissionNetwork& network,
                        std::span<const SteppedBid> stepped_bids, const MarketConfig& config,
                        std::span<const LocalDispatch> local) {
    if (result.status != lp::Status::Optimal) throw std::invalid_argument("cannot settle a non-optimal clearing");
    SettlementReport rep;
    rep.mode = config.settlement_mode;
    const bool uniform = config.settlement_mode == SettlementMode::Uniform;
    const double uniform_price = std::abs(result.marginal_price);

    for (std::size_t g = 0; g < network.generators.size(); ++g) {
        const double q = result.generator_regulation.at(g);
        const double pay = uniform ? uniform_price * std::abs(q) : network.generators[g].price * std::abs(q);
        rep.payments.push_back({network.generators[g].id, "generator", q, pay});
    }
    for (const auto& acc : result.dsos) {
        auto bid = std::find_if(stepped_bids.begin(), stepped_bids.end(),
                                [&](const SteppedBid& b) { return b.dso == acc.dso; });
        if (bid == stepped_bids.end())
            throw std::invalid_argument("no stepped bid for DSO " + std::to_string(acc.dso));
        double revenue = 0.0;
        if (uniform) {
            revenue = uniform_price * acc.total;
        } else {
            for (std::size_t s = 0; s < acc.steps.size(); ++s) revenue += bid->steps.at(s).price * acc.steps[s];
        }
        rep.payments.push_back({"DSO" + std::to_string(acc.dso), "dso", acc.total, revenue});

        DsoProfit profit{acc.dso, revenue, 0.0, 0.0, revenue};
        auto ld = std::find_if(local.begin(), local.end(), [&](const LocalDispatch& l) { return l.dso == acc.dso; });
        if (ld != local.end()) {
            profit.rl_payments = ld->bid_cost;
            profit.loss_cost_delta = config.loss_price * (ld->loss_after - ld->loss_before);
            profit.profit = revenue - profit.rl_payments - profit.loss_cost_delta;
        }
        rep.dso_profit.push_back(profit);
    }

    rep.slack_cost = config.penalty_price * (result.slack_up + result.slack_down);
    rep.tso_cost = result.objective - rep.slack_cost;
    rep.conventional_cost = config.conventional_cost;
    rep.cheaper_option = rep.tso_cost <= rep.conventional_cost ? CheaperOption::ResponsiveLoads
                                                               : CheaperOption::Conventional;
    return rep;
}

}  // namespace balmarket
