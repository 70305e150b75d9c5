#pragma once

// Per-DSO local market. Before central clearing a DSO turns its responsive-load
// offers into a stepped bid; afterwards it decides which loads cover the
// quantity the TSO accepted, trading bid prices against feeder losses.

#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "balmarket/grid_model.hpp"

namespace balmarket {

enum class AggregationMode { PassThrough, LossAdjusted };

std::string to_string(AggregationMode mode);
AggregationMode aggregation_mode_from_string(const std::string& text);

struct BidStep {
    double quantity = 0.0;  // MW
    double price = 0.0;     // currency/MWh
    std::vector<std::string> rl_ids;

    bool operator==(const BidStep&) const = default;
};

struct SteppedBid {
    DsoId dso = 0;
    std::vector<BidStep> steps;  // non-decreasing price

    [[nodiscard]] double total_quantity() const;
    bool operator==(const SteppedBid&) const = default;
};

struct RlDispatch {
    std::string rl_id;
    NodeId node = 0;
    double reduction = 0.0;  // MW
    double price = 0.0;

    bool operator==(const RlDispatch&) const = default;
};

struct LocalDispatch {
    DsoId dso = 0;
    double cleared = 0.0;  // MW requested by the central market
    std::vector<RlDispatch> dispatch;
    double bid_cost = 0.0;
    double loss_before = 0.0;  // MW
    double loss_after = 0.0;   // MW
    double loss_cost = 0.0;    // loss_price * loss_after
    double objective = 0.0;    // bid_cost + loss_cost

    [[nodiscard]] double total_dispatched() const;
    bool operator==(const LocalDispatch&) const = default;
};

/// The central market asked for more than the DSO offered.
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Sorts offers by (effective price, larger marginal loss saving, id) and merges
/// adjacent offers with equal effective price. In loss-adjusted mode the
/// effective price is price - loss_price * marginal_loss_saving, floored at 0.
SteppedBid aggregate_bids(DsoId dso, std::span<const ResponsiveLoadBid> rl_bids, AggregationMode mode,
                          const Feeder& feeder, double loss_price);

/// Offers in merit order: ascending price, then larger marginal loss saving,
/// then id.
std::vector<ResponsiveLoadBid> merit_order(std::span<const ResponsiveLoadBid> rl_bids, const Feeder& feeder);

/// Minimizes sum(price * reduction) + loss_price * loss_after subject to
/// sum(reduction) == cleared_mw and floor <= reduction <= quantity.
/// Exact for the convex quadratic loss: every active-set pattern is solved from
/// its KKT system and the cheapest feasible candidate wins. Supports up to
/// `kMaxLocalBids` offers per DSO.
LocalDispatch dispatch_local(DsoId dso, double cleared_mw, std::span<const ResponsiveLoadBid> rl_bids,
                             const Feeder& feeder, double loss_price);

inline constexpr std::size_t kMaxLocalBids = 10;

/// Reductions keyed by node (several offers may share a node).
std::map<NodeId, double> reductions_by_node(const LocalDispatch& dispatch);

}  // namespace balmarket
