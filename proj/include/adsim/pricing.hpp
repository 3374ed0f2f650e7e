#pragma once

#include <cstdint>
#include <vector>

#include "adsim/advertisers.hpp"
#include "adsim/instance.hpp"
#include "adsim/matching.hpp"
#include "adsim/rng.hpp"
#include "adsim/search_model.hpp"

namespace adsim {

enum class ChargeScheme { randomized, vcg_rebate, leonard };

// A click observed on the solved matching of (instance, bids).
struct ClickEvent {
    ClickMatrix instance;
    BidProfile bids;
    int advertiser = -1;
    int slot = -1;
    void validate() const;  // clicked pair must be assigned in the matching
};

struct ChargeBreakdown {
    double charge = 0.0;
    double rebate = 0.0;
    ChargeScheme scheme = ChargeScheme::randomized;
};

// One draw of the resampled-bid charge: b' ~ Uniform(0, b_i), one re-solve on
// the same instance, charge b_i (1 - y(b')/y(b)).
ChargeBreakdown randomized_charge(const ClickEvent& ev, Philox& rng);

// Exact expectation of the randomized charge over b', by locating the
// breakpoints of the piecewise-constant rate curve b' -> y(b').
ChargeBreakdown expected_randomized_charge(const ClickEvent& ev);

// Charge then rebate: rebate is the welfare the other bids keep because i was
// present, per click; needs exactly one extra solve with i removed.
ChargeBreakdown vcg_rebate_charge(const ClickEvent& ev);

// Prices from the minimal dual: per-impression v_l, per-click v_l / p_il.
struct LeonardPrices {
    Matching matching;
    DualPrices dual;
    std::vector<double> per_impression;  // per slot
    std::vector<double> per_click;       // per advertiser; 0 when unassigned
};
LeonardPrices leonard_prices(const ClickMatrix& instance,
                             const std::vector<double>& bids);

// A realized product-form search: p(i,l) = ad_effects[i] * slot_effects[l].
struct ProductInstance {
    std::vector<double> slot_effects;  // strictly decreasing, positive
    std::vector<double> ad_effects;    // nonnegative qualities
    ClickMatrix matrix() const;
    void validate() const;
};

// Per-slot charges from the next-highest-bid recursion over adjusted bids
// (bid times quality, sorted descending; ties broken by a seeded shuffle).
struct GspResult {
    std::vector<int> occupant;      // per slot: advertiser index, -1 if empty
    std::vector<int> slot_of;       // per advertiser: slot index, -1 if none
    std::vector<double> charges;    // per slot: per-click charge, 0 if empty
    double revenue = 0.0;           // sum over slots of charge * click rate
};
GspResult gsp_closed_form(const ProductInstance& inst,
                          const std::vector<double>& bids, std::uint64_t seed);

// Expected rate of payment b_i y_i(b) - integral of y_i(b', b_-i) over
// b' in (0, b_i), by fixed quadrature against a shared instance stream.
struct PaymentRate {
    double value = 0.0;
    double std_err = 0.0;
    std::int64_t n_samples = 0;
};
PaymentRate expected_payment_rate(const TypeDistribution& dist,
                                  const BidProfile& bids, int advertiser,
                                  std::int64_t n, int quad_points,
                                  std::uint64_t seed,
                                  std::uint64_t stream_offset = 0);

// Gauss-Legendre nodes and weights on (0, 1), ascending nodes.
void gauss_legendre_unit(int points, std::vector<double>& nodes,
                         std::vector<double>& weights);

} // namespace adsim
