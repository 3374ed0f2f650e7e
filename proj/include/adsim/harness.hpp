#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adsim/scenario.hpp"

namespace adsim {

// Per-advertiser tallies of one simulated auction run.
struct AuctionSummary {
    std::int64_t n_searches = 0;
    std::vector<std::int64_t> impressions;
    std::vector<std::int64_t> clicks;
    std::vector<double> ctr_estimate;   // mean assigned click probability
    std::vector<double> spend;          // total charged
    std::vector<double> avg_charge;     // spend / clicks, 0 when unclicked
};

// Simulate n searches under the scenario's declared bids: assign, draw
// Bernoulli clicks, price each click under the configured scheme. Writes
// impressions.csv, clicks.csv, charges.csv, summary.json, runrecord.json
// into out_dir and returns the tallies.
AuctionSummary cmd_auction_run(const Scenario& s, std::int64_t n_searches,
                               const std::string& out_dir);

// Solve for the equilibrium bid profile; writes equilibrium.json.
EquilibriumReport cmd_equilibrium(const Scenario& s, const std::string& out_dir);

// Run the bid dynamics; writes trajectory.csv.
Trajectory cmd_dynamics(const Scenario& s, const std::string& out_dir);

// Price sampled click events under all three charge schemes side by side;
// writes the comparison table to charges.csv and returns the largest
// absolute disagreement between the two deterministic schemes.
double cmd_price_audit(const Scenario& s, std::int64_t n_events,
                       const std::string& out_dir);

// Welfare-maximizing rates for a finite-support scenario; writes oracle.json.
SystemSolution cmd_system_oracle(const Scenario& s, const std::string& out_dir);

} // namespace adsim
