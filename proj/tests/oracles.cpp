#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include <Eigen/Dense>

namespace oracle {

namespace {

struct Walk {
    std::map<NodeId, std::ptrdiff_t> up;  // branch towards the root, -1 at the root
    std::vector<double> p, q;             // accumulated branch flows
};

Walk walk(const balmarket::Feeder& feeder, const std::map<NodeId, double>& reductions) {
    std::map<NodeId, std::vector<std::size_t>> touching;
    for (std::size_t b = 0; b < feeder.branches.size(); ++b) {
        touching[feeder.branches[b].from].push_back(b);
        touching[feeder.branches[b].to].push_back(b);
    }
    Walk w;
    w.up[feeder.root_node] = -1;
    std::function<void(NodeId)> visit = [&](NodeId n) {
        for (std::size_t b : touching[n]) {
            const auto& br = feeder.branches[b];
            const NodeId other = br.from == n ? br.to : br.from;
            if (w.up.count(other)) continue;
            w.up[other] = static_cast<std::ptrdiff_t>(b);
            visit(other);
        }
    };
    visit(feeder.root_node);

    w.p.assign(feeder.branches.size(), 0.0);
    w.q.assign(feeder.branches.size(), 0.0);
    for (const auto& node : feeder.nodes) {
        auto it = reductions.find(node.node_id);
        const double np = node.base_load_p - (it == reductions.end() ? 0.0 : it->second);
        NodeId at = node.node_id;
        while (w.up.at(at) >= 0) {
            const auto b = static_cast<std::size_t>(w.up.at(at));
            w.p[b] += np;
            w.q[b] += node.base_load_q;
            at = feeder.branches[b].from == at ? feeder.branches[b].to : feeder.branches[b].from;
        }
    }
    return w;
}

}  // namespace

double feeder_loss(const balmarket::Feeder& feeder, const std::map<NodeId, double>& reductions) {
    const Walk w = walk(feeder, reductions);
    double loss = 0.0;
    const double v2 = feeder.nominal_voltage * feeder.nominal_voltage;
    for (std::size_t b = 0; b < feeder.branches.size(); ++b)
        loss += feeder.branches[b].r * (w.p[b] * w.p[b] + w.q[b] * w.q[b]) / v2;
    return loss;
}

double loss_gradient(const balmarket::Feeder& feeder, const std::map<NodeId, double>& reductions, NodeId node) {
    const Walk w = walk(feeder, reductions);
    double g = 0.0;
    NodeId at = node;
    while (w.up.at(at) >= 0) {
        const auto b = static_cast<std::size_t>(w.up.at(at));
        g += 2.0 * feeder.branches[b].r * w.p[b];
        at = feeder.branches[b].from == at ? feeder.branches[b].to : feeder.branches[b].from;
    }
    return g / (feeder.nominal_voltage * feeder.nominal_voltage);
}

double lp_vertex_minimum(const balmarket::lp::LinearProgram& program) {
    const int n = program.num_variables();
    const int m = program.num_rows();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, n);
    Eigen::VectorXd b(m);
    for (int i = 0; i < m; ++i) {
        for (const auto& t : program.rows[i].terms) a(i, t.column) += t.coefficient;
        b(i) = program.rows[i].rhs;
    }

    double best = std::numeric_limits<double>::infinity();
    std::vector<int> state(n, 0);  // 0 lower, 1 upper, 2 free
    long total = 1;
    for (int j = 0; j < n; ++j) total *= 3;
    for (long code = 0; code < total; ++code) {
        long c = code;
        std::vector<int> free_cols;
        Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
        for (int j = 0; j < n; ++j) {
            state[j] = static_cast<int>(c % 3);
            c /= 3;
            if (state[j] == 2) free_cols.push_back(j);
            else x(j) = state[j] == 0 ? program.lower[j] : program.upper[j];
        }
        if (static_cast<int>(free_cols.size()) > m) continue;
        Eigen::VectorXd r = b - a * x;
        if (!free_cols.empty()) {
            Eigen::MatrixXd af(m, free_cols.size());
            for (std::size_t k = 0; k < free_cols.size(); ++k) af.col(k) = a.col(free_cols[k]);
            Eigen::FullPivLU<Eigen::MatrixXd> lu(af);
            if (lu.rank() < static_cast<int>(free_cols.size())) continue;
            const Eigen::VectorXd xf = af.colPivHouseholderQr().solve(r);
            for (std::size_t k = 0; k < free_cols.size(); ++k) x(free_cols[k]) = xf(k);
        }
        if ((a * x - b).cwiseAbs().maxCoeff() > 1e-8) continue;
        bool inside = true;
        for (int j = 0; j < n; ++j)
            inside = inside && x(j) >= program.lower[j] - 1e-9 && x(j) <= program.upper[j] + 1e-9;
        if (!inside) continue;
        double obj = 0.0;
        for (int j = 0; j < n; ++j) obj += program.objective[j] * x(j);
        best = std::min(best, obj);
    }
    return best;
}

MeritResult merit_order(const std::vector<Offer>& up, const std::vector<Offer>& down, double need, double penalty) {
    const auto& pool = need >= 0.0 ? up : down;
    std::vector<std::size_t> order(pool.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (pool[a].price != pool[b].price) return pool[a].price < pool[b].price;
        if (pool[a].owner != pool[b].owner) return pool[a].owner < pool[b].owner;
        return pool[a].step < pool[b].step;
    });
    MeritResult out;
    out.accepted.assign(pool.size(), 0.0);
    double rest = std::abs(need);
    for (std::size_t i : order) {
        if (pool[i].price >= penalty) break;
        const double take = std::min(rest, pool[i].quantity);
        out.accepted[i] = take;
        out.cost += take * pool[i].price;
        rest -= take;
    }
    out.slack = rest;
    out.cost += rest * penalty;
    return out;
}

double exhaustive_clearing(const std::vector<Offer>& up, const std::vector<Offer>& down, double need,
                           double penalty, double grain) {
    const auto& pool = need >= 0.0 ? up : down;
    const long target = std::lround(std::abs(need) / grain);
    std::vector<long> cap;
    for (const auto& o : pool) cap.push_back(static_cast<long>(std::floor(o.quantity / grain + 1e-9)));

    double best = std::numeric_limits<double>::infinity();
    std::function<void(std::size_t, long, double)> go = [&](std::size_t i, long used, double cost) {
        if (used > target) return;
        if (i == pool.size()) {
            best = std::min(best, cost + static_cast<double>(target - used) * grain * penalty);
            return;
        }
        for (long k = 0; k <= cap[i]; ++k) go(i + 1, used + k, cost + static_cast<double>(k) * grain * pool[i].price);
    };
    go(0, 0, 0.0);
    return best;
}

GridDispatch local_grid_search(const std::vector<balmarket::ResponsiveLoadBid>& bids, const balmarket::Feeder& feeder,
                               double cleared, double loss_price, double grain) {
    GridDispatch best;
    best.objective = std::numeric_limits<double>::infinity();
    const std::size_t n = bids.size();
    std::vector<double> x(n, 0.0);

    auto evaluate = [&] {
        std::map<NodeId, double> red;
        double cost = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            red[bids[i].feeder_node] += x[i];
            cost += bids[i].price * x[i];
        }
        cost += loss_price * feeder_loss(feeder, red);
        if (cost < best.objective) {
            best.objective = cost;
            best.reductions = x;
        }
    };

    std::function<void(std::size_t, double)> go = [&](std::size_t i, double used) {
        if (i + 1 == n) {
            const double last = cleared - used;
            if (last < bids[i].floor - 1e-9 || last > bids[i].quantity + 1e-9) return;
            x[i] = std::clamp(last, bids[i].floor, bids[i].quantity);
            evaluate();
            return;
        }
        const long lo = static_cast<long>(std::ceil(bids[i].floor / grain - 1e-9));
        const long hi = static_cast<long>(std::floor(bids[i].quantity / grain + 1e-9));
        for (long k = lo; k <= hi; ++k) {
            x[i] = static_cast<double>(k) * grain;
            if (used + x[i] > cleared + 1e-9) break;
            go(i + 1, used + x[i]);
        }
    };
    if (n > 0) go(0, 0.0);
    return best;
}

std::vector<Offer> offers_from(const std::vector<balmarket::SteppedBid>& bids) {
    std::vector<Offer> out;
    for (const auto& b : bids)
        for (std::size_t s = 0; s < b.steps.size(); ++s)
            out.push_back({b.dso, static_cast<int>(s), b.steps[s].quantity, b.steps[s].price});
    return out;
}

}  // namespace oracle
