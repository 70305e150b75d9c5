#include <doctest.h>

#include <cmath>

#include "balmarket/power_flow.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace balmarket;

namespace {

TransmissionNetwork network_of(int buses, std::vector<std::array<double, 3>> branches) {
    TransmissionNetwork n;
    for (int i = 0; i < buses; ++i) n.buses.push_back({i, "b" + std::to_string(i), 0.0});
    int id = 0;
    for (const auto& b : branches)
        n.branches.push_back({id++, static_cast<BusId>(b[0]), static_cast<BusId>(b[1]), b[2], 1e3});
    return n;
}

Feeder single_branch_feeder(double r, double load) {
    Feeder f;
    f.dso = 1;
    f.root_node = 1;
    f.nominal_voltage = 1.0;
    f.nodes = {{1, 0.0, 0.0}, {2, load, 0.0}};
    f.branches = {{1, 2, r, 0.0}};
    return f;
}

}  // namespace

TEST_CASE("two-bus angles and flow") {
    const auto net = network_of(2, {{0, 1, 10.0}});
    const std::vector<double> p{100.0, -100.0};
    const auto a = solve_dc_angles(net, p, 100.0, 0);
    CHECK(a.slack_bus == 0);
    CHECK(a.angles[0] == 0.0);
    CHECK(a.angles[1] == doctest::Approx(-0.1).epsilon(1e-12));
    const auto f = branch_flows(net, a, 100.0);
    CHECK(f[0] == doctest::Approx(100.0).epsilon(1e-12));
}

TEST_CASE("zero injections give zero angles and flows") {
    const auto& net = fixtures::bundled().network;
    const std::vector<double> p(5, 0.0);
    const auto a = solve_dc_angles(net, p, 100.0);
    for (double d : a.angles) CHECK(d == 0.0);
    for (double f : branch_flows(net, a, 100.0)) CHECK(f == 0.0);
}

TEST_CASE("three-bus ring splits two to one") {
    const auto net = network_of(3, {{0, 1, 10.0}, {0, 2, 10.0}, {2, 1, 10.0}});
    const std::vector<double> p{100.0, -100.0, 0.0};
    const auto f = branch_flows(net, solve_dc_angles(net, p, 100.0, 0), 100.0);
    CHECK(f[0] / 100.0 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(f[1] / 100.0 == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(f[2] / 100.0 == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("power flow errors") {
    const auto& net = fixtures::bundled().network;
    CHECK_THROWS_AS(solve_dc_angles(net, std::vector<double>{1.0, 0.0, 0.0, 0.0, 0.0}, 100.0), PowerFlowError);
    const auto split = network_of(4, {{0, 1, 5.0}, {2, 3, 5.0}});
    CHECK_THROWS_AS(solve_dc_angles(split, std::vector<double>{10.0, -10.0, 0.0, 0.0}, 100.0, 0), PowerFlowError);
}

TEST_CASE("day-ahead flows on the bundled network") {
    const auto& net = fixtures::bundled().network;
    std::vector<double> p;
    for (const auto& b : net.buses) p.push_back(b.scheduled_injection);
    const auto f = branch_flows(net, solve_dc_angles(net, p, 100.0), 100.0);
    for (std::size_t l = 0; l < f.size(); ++l) CHECK(std::abs(f[l]) <= net.branches[l].flow_limit);
    // the 4-0 line is the one that can bind
    CHECK(std::abs(f[5]) == doctest::Approx(240.0).epsilon(1e-4));
}

TEST_CASE("random balanced injections on the bundled network") {
    const auto& net = fixtures::bundled().network;
    fixtures::Gen g(11);
    for (int trial = 0; trial < 200; ++trial) {
        const auto p = fixtures::balanced_injections(g, net.buses.size(), 500.0);
        const auto a = solve_dc_angles(net, p, 100.0);
        CHECK(a.angles[kDefaultSlackBus] == 0.0);

        const auto back = nodal_injections(net, a.angles, 100.0);
        for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(back[i] - p[i]) / 100.0 <= 1e-8);

        const auto f = branch_flows(net, a, 100.0);
        std::vector<double> kirchhoff(p.size(), 0.0);
        for (std::size_t l = 0; l < f.size(); ++l) {
            kirchhoff[net.branches[l].from_bus] += f[l];
            kirchhoff[net.branches[l].to_bus] -= f[l];
        }
        for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(kirchhoff[i] - p[i]) <= 1e-8 * 100.0);

        // shifting every angle leaves flows alone
        AngleSolution shifted = a;
        const double c = g.uniform(-1.0, 1.0);
        for (double& d : shifted.angles) d += c;
        const auto fs = branch_flows(net, shifted, 100.0);
        for (std::size_t l = 0; l < f.size(); ++l) CHECK(std::abs(fs[l] - f[l]) <= 1e-9);

        // reversing a branch negates its flow
        auto reversed = net;
        const auto l = static_cast<std::size_t>(g.integer(0, static_cast<int>(net.branches.size()) - 1));
        std::swap(reversed.branches[l].from_bus, reversed.branches[l].to_bus);
        const auto fr = branch_flows(reversed, solve_dc_angles(reversed, p, 100.0), 100.0);
        CHECK(std::abs(fr[l] + f[l]) <= 1e-9);

        // another slack choice gives the same flows
        const auto f0 = branch_flows(net, solve_dc_angles(net, p, 100.0, 0), 100.0);
        for (std::size_t k = 0; k < f.size(); ++k) CHECK(std::abs(f0[k] - f[k]) <= 1e-8);
    }
}

TEST_CASE("single-branch loss closed form") {
    const auto f = single_branch_feeder(0.01, 1.0);
    CHECK(feeder_loss(f).total_loss == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(feeder_loss(single_branch_feeder(0.01, 0.0)).total_loss == 0.0);
}

TEST_CASE("zero loads give zero loss") {
    auto f = fixtures::bundled().feeder(1);
    for (auto& n : f.nodes) n.base_load_p = n.base_load_q = 0.0;
    CHECK(feeder_loss(f).total_loss == 0.0);
}

TEST_CASE("feeder loss input errors") {
    const auto& f = fixtures::bundled().feeder(1);
    CHECK_THROWS_AS(feeder_loss(f, {{699, 0.1}}), std::invalid_argument);
    CHECK_THROWS_AS(feeder_loss(f, {{634, 1e3}}), std::invalid_argument);
    CHECK_THROWS_AS(feeder_loss(f, {{634, -0.1}}), std::invalid_argument);
    CHECK_THROWS_AS(marginal_loss_saving(f, 699), std::invalid_argument);
}

TEST_CASE("feeder state bookkeeping") {
    for (const auto& f : fixtures::bundled().feeders) {
        const auto st = feeder_loss(f);
        double sum = 0.0;
        for (double l : st.branch_loss) sum += l;
        CHECK(st.total_loss == doctest::Approx(sum).epsilon(1e-12));
        // root branches carry the whole feeder load
        double load = 0.0, root_flow = 0.0;
        for (const auto& n : f.nodes) load += n.base_load_p;
        for (std::size_t b = 0; b < f.branches.size(); ++b)
            if (f.branches[b].from == f.root_node || f.branches[b].to == f.root_node) root_flow += st.branch_flow_p[b];
        CHECK(root_flow == doctest::Approx(load).epsilon(1e-12));
    }
}

TEST_CASE("one-pass loss matches the path oracle") {
    fixtures::Gen g(5);
    for (const auto& f : fixtures::bundled().feeders) {
        CHECK(std::abs(feeder_loss(f).total_loss - oracle::feeder_loss(f, {})) <= 1e-9);
        for (int trial = 0; trial < 100; ++trial) {
            std::map<NodeId, double> red;
            for (const auto& n : f.nodes)
                if (g.integer(0, 2) == 0) red[n.node_id] = g.uniform(0.0, n.base_load_p);
            CHECK(std::abs(feeder_loss(f, red).total_loss - oracle::feeder_loss(f, red)) <= 1e-9);
        }
    }
}

TEST_CASE("deeper node saves more loss") {
    const auto& f = fixtures::bundled().feeder(1);
    auto path_r = [&](NodeId n) {
        double r = 0.0;
        for (std::size_t b : path_to_root(f, n)) r += f.branches[b].r;
        return r;
    };
    REQUIRE(path_r(634) > path_r(675));
    const double base = oracle::feeder_loss(f, {});
    const double save_634 = base - feeder_loss(f, {{634, 1.0}}).total_loss;
    const double save_675 = base - feeder_loss(f, {{675, 1.0}}).total_loss;
    CHECK(save_634 > save_675);
    CHECK(std::abs(save_634 - (base - oracle::feeder_loss(f, {{634, 1.0}}))) <= 1e-9);
    CHECK(std::abs(save_675 - (base - oracle::feeder_loss(f, {{675, 1.0}}))) <= 1e-9);
}

TEST_CASE("marginal saving peaks at a leaf") {
    for (const auto& f : fixtures::bundled().feeders) {
        NodeId best = f.root_node;
        double best_saving = -1.0;
        NodeId oracle_best = f.root_node;
        double oracle_saving = -1.0;
        for (const auto& n : f.nodes) {
            const double s = marginal_loss_saving(f, n.node_id);
            CHECK(s >= 0.0);
            if (s > best_saving) best_saving = s, best = n.node_id;
            const double h = 0.01;
            std::map<NodeId, double> hi;
            // one-sided at nodes without consumption to stay inside [0, base]
            double os = 0.0;
            if (n.base_load_p >= h) {
                hi[n.node_id] = h;
                os = (oracle::feeder_loss(f, {}) - oracle::feeder_loss(f, hi)) / h;
            } else {
                os = s;
            }
            if (os > oracle_saving) oracle_saving = os, oracle_best = n.node_id;
        }
        CHECK(best == oracle_best);
        int degree = 0;
        for (const auto& b : f.branches) degree += (b.from == best) + (b.to == best);
        CHECK(degree == 1);
        CHECK(marginal_loss_saving(f, f.root_node) == 0.0);
    }
}

TEST_CASE("highest-resistance leaf saves the most on feeders 1 and 2") {
    for (DsoId dso : {1, 2}) {
        const auto& f = fixtures::bundled().feeder(dso);
        NodeId deepest = f.root_node, best = f.root_node;
        double deepest_r = -1.0, best_saving = -1.0;
        for (const auto& n : f.nodes) {
            double r = 0.0;
            for (std::size_t b : path_to_root(f, n.node_id)) r += f.branches[b].r;
            if (r > deepest_r) deepest_r = r, deepest = n.node_id;
            const double s = oracle::loss_gradient(f, {}, n.node_id);
            if (s > best_saving) best_saving = s, best = n.node_id;
        }
        CHECK(deepest == best);
        CHECK(marginal_loss_saving(f, deepest) == doctest::Approx(best_saving).epsilon(1e-9));
    }
}

TEST_CASE("zero-resistance path saves nothing") {
    auto f = single_branch_feeder(0.0, 1.0);
    CHECK(marginal_loss_saving(f, 2) == 0.0);
}

TEST_CASE("loss is monotone in reductions and the gradient is consistent") {
    fixtures::Gen g(99);
    for (const auto& f : fixtures::bundled().feeders) {
        for (int trial = 0; trial < 200; ++trial) {
            const auto& node = f.nodes[static_cast<std::size_t>(g.integer(0, static_cast<int>(f.nodes.size()) - 1))];
            std::map<NodeId, double> red;
            for (const auto& n : f.nodes)
                if (g.integer(0, 3) == 0) red[n.node_id] = g.uniform(0.0, n.base_load_p);
            const double before = feeder_loss(f, red).total_loss;
            auto more = red;
            more[node.node_id] = std::min(node.base_load_p, red[node.node_id] + g.uniform(0.0, node.base_load_p));
            CHECK(feeder_loss(f, more).total_loss <= before + 1e-12);

            // central difference from the public loss function
            const double h = 0.01;
            const double x = red[node.node_id];
            if (x - h < 0.0 || x + h > node.base_load_p) continue;
            auto up = red, down = red;
            up[node.node_id] = x + h;
            down[node.node_id] = x - h;
            const double cd = (feeder_loss(f, down).total_loss - feeder_loss(f, up).total_loss) / (2.0 * h);
            CHECK(std::abs(cd - marginal_loss_saving(f, node.node_id, red)) <= 1e-6);
            CHECK(std::abs(oracle::loss_gradient(f, red, node.node_id) - marginal_loss_saving(f, node.node_id, red)) <=
                  1e-6);
        }
    }
}
