#pragma once

// TSO real-time balancing market.
//
// The clearing LP works on total (day-ahead + regulation) quantities so that
// branch flows include the scheduled base flow:
//
//   min  sum_g price_g (up_g + down_g) + sum_k price_k x_k + penalty (s_up + s_down)
//   s.t. per bus i:   sum_g (up_g - down_g) + [i = recourse bus](s_up - s_down)
//                     - sum_{l out of i} f_l + sum_{l into i} f_l - sum_{t at i} tie_t
//                       = -(scheduled_i + imbalance_i)
//        per branch:  f_l - base * B_l (theta_from - theta_to) = 0,   |f_l| <= limit_l
//        per DSO:     tie_t + sum_{k in DSO} x_k = 0,                 |tie_t| <= limit_t
//        theta_ref = 0, 0 <= x_k <= step quantity, generator bounds
//
// tie_t is the flow from the transmission bus into the distribution system, so
// accepted load reduction shows up as a negative tie flow.

#include <span>
#include <string>
#include <vector>

#include "balmarket/grid_model.hpp"
#include "balmarket/local_market.hpp"
#include "balmarket/lp.hpp"

namespace balmarket {

struct DsoAcceptance {
    DsoId dso = 0;
    BusId bus = 0;
    std::vector<double> steps;  // MW accepted per bid step
    double total = 0.0;         // MW
    double tie_flow = 0.0;      // MW, transmission -> distribution

    bool operator==(const DsoAcceptance&) const = default;
};

struct CentralClearingResult {
    lp::Status status = lp::Status::Optimal;
    std::vector<double> imbalance;             // MW per bus
    std::vector<double> generator_regulation;  // MW, aligned with network.generators
    std::vector<DsoAcceptance> dsos;           // ascending dso id
    double slack_up = 0.0;                     // MW
    double slack_down = 0.0;                   // MW
    BusId recourse_bus = 0;
    std::vector<double> angles;  // rad per bus
    std::vector<double> flows;   // MW per branch
    double objective = 0.0;
    double marginal_price = 0.0;  // dual of the recourse-bus balance

    [[nodiscard]] const DsoAcceptance* dso(DsoId id) const;
    bool operator==(const CentralClearingResult&) const = default;
};

struct ClearingOptions {
    bool enable_slack = true;
    bool relax_line_limits = false;
    /// Re-optimizes at fixed cost to prefer lower DSO ids, then lower steps.
    bool lexicographic_ties = true;
};

/// Bus where the recourse slack sits: largest |imbalance|, lowest id on ties;
/// the angle reference bus when every entry is zero.
BusId recourse_bus(std::span<const double> imbalance, BusId reference);

/// Clears one period. Every stepped bid must belong to a DSO with a tie line.
/// Returns status Infeasible only when the slack is disabled.
CentralClearingResult clear_central(const TransmissionNetwork& network, std::span<const SteppedBid> stepped_bids,
                                    std::span<const double> imbalance, const MarketConfig& config,
                                    const ClearingOptions& options = {});

enum class CheaperOption { ResponsiveLoads, Conventional };

std::string to_string(CheaperOption option);

struct Payment {
    std::string participant;  // generator id or "DSO<n>"
    std::string kind;         // "generator" | "dso"
    double quantity = 0.0;    // MW, signed (negative = down-regulation)
    double payment = 0.0;

    bool operator==(const Payment&) const = default;
};

struct DsoProfit {
    DsoId dso = 0;
    double revenue = 0.0;
    double rl_payments = 0.0;
    double loss_cost_delta = 0.0;  // loss_price * (loss_after - loss_before)
    double profit = 0.0;

    bool operator==(const DsoProfit&) const = default;
};

struct SettlementReport {
    SettlementMode mode = SettlementMode::PayAsBid;
    std::vector<Payment> payments;
    std::vector<DsoProfit> dso_profit;
    double slack_cost = 0.0;
    double tso_cost = 0.0;           // clearing objective without the penalty slack
    double conventional_cost = 0.0;  // from config
    CheaperOption cheaper_option = CheaperOption::ResponsiveLoads;

    bool operator==(const SettlementReport&) const = default;
};

/// `local` supplies the RL-side costs for DSO profit; DSOs without a local
/// dispatch keep their full revenue as profit.
SettlementReport settle(const CentralClearingResult& result, const TransmissionNetwork& network,
                        std::span<const SteppedBid> stepped_bids, const MarketConfig& config,
                        std::span<const LocalDispatch> local = {});

}  // namespace balmarket
