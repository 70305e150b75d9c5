#include "balmarket/local_market.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "balmarket/power_flow.hpp"

namespace balmarket {

namespace {

constexpr double kQuantityTol = 1e-9;

struct RankedBid {
    ResponsiveLoadBid bid;
    double effective_price = 0.0;
    double saving = 0.0;
};

bool ranked_before(const RankedBid& a, const RankedBid& b) {
    if (a.effective_price != b.effective_price) return a.effective_price < b.effective_price;
    if (a.saving != b.saving) return a.saving > b.saving;
    return a.bid.id < b.bid.id;
}

std::vector<RankedBid> rank(std::span<const ResponsiveLoadBid> bids, const Feeder& feeder, double loss_price,
                            AggregationMode mode) {
    std::vector<RankedBid> ranked;
    for (const auto& b : bids) {
        const double saving = marginal_loss_saving(feeder, b.feeder_node);
        double price = b.price;
        if (mode == AggregationMode::LossAdjusted) price = std::max(0.0, b.price - loss_price * saving);
        ranked.push_back({b, price, saving});
    }
    std::stable_sort(ranked.begin(), ranked.end(), ranked_before);
    return ranked;
}

// Objective sum(c x) + lambda * loss(x) written as an explicit quadratic in the
// reductions: loss(x) = sum_b r_b ((P_b - a_b'x)^2 + Q_b^2) / V^2 where a_b marks
// the offers downstream of branch b.
class LocalModel {
public:
    LocalModel(std::span<const ResponsiveLoadBid> bids, const Feeder& feeder, double loss_price)
        : n_(static_cast<int>(bids.size())), price_(n_), lambda_(loss_price) {
        const FeederState base = feeder_loss(feeder);
        const double v2 = feeder.nominal_voltage * feeder.nominal_voltage;
        const std::size_t nb = feeder.branches.size();
        downstream_.assign(nb, std::vector<int>{});
        for (int k = 0; k < n_; ++k) {
            price_(k) = bids[k].price;
            for (std::size_t b : path_to_root(feeder, bids[k].feeder_node)) downstream_[b].push_back(k);
        }
        weight_.resize(nb);
        flow_p_.resize(nb);
        constant_ = 0.0;
        for (std::size_t b = 0; b < nb; ++b) {
            weight_[b] = feeder.branches[b].r / v2;
            flow_p_[b] = base.branch_flow_p[b];
            constant_ += weight_[b] * base.branch_flow_q[b] * base.branch_flow_q[b];
        }

        hessian_ = Eigen::MatrixXd::Zero(n_, n_);
        linear_ = price_;
        for (std::size_t b = 0; b < nb; ++b) {
            for (int i : downstream_[b]) {
                linear_(i) -= 2.0 * lambda_ * weight_[b] * flow_p_[b];
                for (int j : downstream_[b]) hessian_(i, j) += 2.0 * lambda_ * weight_[b];
            }
        }
    }

    [[nodiscard]] double objective(const Eigen::VectorXd& x) const {
        double loss = constant_;
        for (std::size_t b = 0; b < weight_.size(); ++b) {
            double p = flow_p_[b];
            for (int k : downstream_[b]) p -= x(k);
            loss += weight_[b] * p * p;
        }
        return price_.dot(x) + lambda_ * loss;
    }

    [[nodiscard]] const Eigen::MatrixXd& hessian() const { return hessian_; }
    [[nodiscard]] const Eigen::VectorXd& linear() const { return linear_; }

private:
    int n_;
    Eigen::VectorXd price_;
    double lambda_;
    std::vector<std::vector<int>> downstream_;
    std::vector<double> weight_;
    std::vector<double> flow_p_;
    double constant_ = 0.0;
    Eigen::MatrixXd hessian_;
    Eigen::VectorXd linear_;
};

enum class Pin { Lower, Upper, Free };

// Cheapest feasible KKT point over all active-set patterns.
Eigen::VectorXd exact_dispatch(const LocalModel& model, std::span<const ResponsiveLoadBid> bids, double cleared) {
    const int n = static_cast<int>(bids.size());
    std::vector<Pin> pins(n, Pin::Lower);
    Eigen::VectorXd best;
    double best_value = std::numeric_limits<double>::infinity();

    const Eigen::MatrixXd& h = model.hessian();
    const Eigen::VectorXd& g = model.linear();
    while (true) {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
        std::vector<int> free;
        double remaining = cleared;
        for (int k = 0; k < n; ++k) {
            if (pins[k] == Pin::Free) {
                free.push_back(k);
                continue;
            }
            x(k) = pins[k] == Pin::Lower ? bids[k].floor : bids[k].quantity;
            remaining -= x(k);
        }

        bool feasible = true;
        if (free.empty()) {
            feasible = std::abs(remaining) <= kQuantityTol;
        } else {
            // [H_FF 1; 1' 0] [x_F; mu] = [-(g_F + H_FN x_N); remaining]
            const int f = static_cast<int>(free.size());
            Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(f + 1, f + 1);
            Eigen::VectorXd rhs(f + 1);
            const Eigen::VectorXd fixed_gradient = g + h * x;
            for (int a = 0; a < f; ++a) {
                for (int b = 0; b < f; ++b) kkt(a, b) = h(free[a], free[b]);
                kkt(a, f) = 1.0;
                kkt(f, a) = 1.0;
                rhs(a) = -fixed_gradient(free[a]);
            }
            rhs(f) = remaining;
            Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
            if (!lu.isInvertible()) {
                feasible = false;
            } else {
                const Eigen::VectorXd sol = lu.solve(rhs);
                for (int a = 0; a < f && feasible; ++a) {
                    const auto& bid = bids[free[a]];
                    double v = sol(a);
                    if (v < bid.floor - kQuantityTol || v > bid.quantity + kQuantityTol) feasible = false;
                    x(free[a]) = std::clamp(v, bid.floor, bid.quantity);
                }
            }
        }
        if (feasible) {
            const double value = model.objective(x);
            if (value < best_value - 1e-12) {
                best_value = value;
                best = x;
            }
        }

        int k = 0;
        while (k < n && pins[k] == Pin::Free) pins[k++] = Pin::Lower;
        if (k == n) break;
        pins[k] = pins[k] == Pin::Lower ? Pin::Upper : Pin::Free;
    }
    if (best.size() != n) throw std::logic_error("local dispatch: no feasible active set");
    return best;
}

Eigen::VectorXd merit_dispatch(std::span<const ResponsiveLoadBid> bids, const Feeder& feeder, double cleared) {
    const int n = static_cast<int>(bids.size());
    Eigen::VectorXd x(n);
    double remaining = cleared;
    for (int k = 0; k < n; ++k) {
        x(k) = bids[k].floor;
        remaining -= x(k);
    }
    for (const auto& r : rank(bids, feeder, 0.0, AggregationMode::PassThrough)) {
        if (remaining <= 0.0) break;
        const auto pos = std::find_if(bids.begin(), bids.end(), [&](const auto& b) { return b.id == r.bid.id; });
        const int k = static_cast<int>(pos - bids.begin());
        const double take = std::min(remaining, bids[k].quantity - x(k));
        x(k) += take;
        remaining -= take;
    }
    return x;
}

}  // namespace

std::string to_string(AggregationMode mode) {
    return mode == AggregationMode::PassThrough ? "pass-through" : "loss-adjusted";
}

AggregationMode aggregation_mode_from_string(const std::string& text) {
    if (text == "pass-through") return AggregationMode::PassThrough;
    if (text == "loss-adjusted") return AggregationMode::LossAdjusted;
    throw std::invalid_argument("aggregation mode must be pass-through or loss-adjusted, got " + text);
}

double SteppedBid::total_quantity() const {
    double total = 0.0;
    for (const auto& s : steps) total += s.quantity;
    return total;
}

double LocalDispatch::total_dispatched() const {
    double total = 0.0;
    for (const auto& d : dispatch) total += d.reduction;
    return total;
}

SteppedBid aggregate_bids(DsoId dso, std::span<const ResponsiveLoadBid> rl_bids, AggregationMode mode,
                          const Feeder& feeder, double loss_price) {
    SteppedBid out{dso, {}};
    for (const auto& b : rl_bids) {
        if (b.dso != dso)
            throw std::invalid_argument("bid " + b.id + " belongs to DSO " + std::to_string(b.dso) + ", not " +
                                        std::to_string(dso));
    }
    for (const auto& r : rank(rl_bids, feeder, loss_price, mode)) {
        if (r.bid.quantity <= 0.0) continue;
        if (!out.steps.empty() && out.steps.back().price == r.effective_price) {
            out.steps.back().quantity += r.bid.quantity;
            out.steps.back().rl_ids.push_back(r.bid.id);
        } else {
            out.steps.push_back(BidStep{r.bid.quantity, r.effective_price, {r.bid.id}});
        }
    }
    return out;
}

std::vector<ResponsiveLoadBid> merit_order(std::span<const ResponsiveLoadBid> rl_bids, const Feeder& feeder) {
    std::vector<ResponsiveLoadBid> out;
    for (auto& r : rank(rl_bids, feeder, 0.0, AggregationMode::PassThrough)) out.push_back(std::move(r.bid));
    return out;
}

LocalDispatch dispatch_local(DsoId dso, double cleared_mw, std::span<const ResponsiveLoadBid> rl_bids,
                             const Feeder& feeder, double loss_price) {
    double offered = 0.0;
    double floors = 0.0;
    for (const auto& b : rl_bids) {
        if (b.dso != dso)
            throw std::invalid_argument("bid " + b.id + " belongs to DSO " + std::to_string(b.dso) + ", not " +
                                        std::to_string(dso));
        offered += b.quantity;
        floors += b.floor;
    }
    if (cleared_mw > offered + 1e-6 || cleared_mw < floors - 1e-6 || cleared_mw < -1e-6)
        throw ContractViolation("DSO " + std::to_string(dso) + " was cleared for " + std::to_string(cleared_mw) +
                                " MW but offers cover [" + std::to_string(floors) + ", " + std::to_string(offered) +
                                "] MW");
    if (rl_bids.size() > kMaxLocalBids)
        throw std::invalid_argument("local dispatch supports at most " + std::to_string(kMaxLocalBids) +
                                    " offers per DSO");
    const double cleared = std::clamp(cleared_mw, floors, offered);

    Eigen::VectorXd x;
    if (rl_bids.empty()) {
        x.resize(0);
    } else if (loss_price == 0.0) {
        x = merit_dispatch(rl_bids, feeder, cleared);
    } else {
        x = exact_dispatch(LocalModel(rl_bids, feeder, loss_price), rl_bids, cleared);
    }

    LocalDispatch out;
    out.dso = dso;
    out.cleared = cleared_mw;
    std::map<NodeId, double> by_node;
    for (std::size_t k = 0; k < rl_bids.size(); ++k) {
        const auto& b = rl_bids[k];
        const double v = x(static_cast<Eigen::Index>(k));
        out.dispatch.push_back({b.id, b.feeder_node, v, b.price});
        out.bid_cost += b.price * v;
        by_node[b.feeder_node] += v;
    }
    out.loss_before = feeder_loss(feeder).total_loss;
    out.loss_after = feeder_loss(feeder, by_node).total_loss;
    out.loss_cost = loss_price * out.loss_after;
    out.objective = out.bid_cost + out.loss_cost;
    return out;
}

std::map<NodeId, double> reductions_by_node(const LocalDispatch& dispatch) {
    std::map<NodeId, double> out;
    for (const auto& d : dispatch.dispatch) out[d.node] += d.reduction;
    return out;
}

}  // namespace balmarket
