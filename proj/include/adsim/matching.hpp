#pragma once

#include <vector>

#include "adsim/instance.hpp"

namespace adsim {

// Result of one per-search assignment. slot_of[i] is the slot of advertiser i
// or -1; ctr[i] is the click probability advertiser i ends up with. The
// objective is sum over assigned pairs of bid*p + benefit, accumulated in
// ascending advertiser order so oracle comparisons are bit-stable.
struct Matching {
    std::vector<int> slot_of;
    std::vector<double> ctr;
    double objective = 0.0;

    int assigned_count() const {
        int n = 0;
        for (int s : slot_of) n += (s >= 0);
        return n;
    }
};

// Dual prices for the pure-bid assignment objective. ad_surplus[i] + slot_price[l]
// dominates bid_i * p(i,l) for every pair, both are nonnegative, and the two sums
// add up to the optimal objective. Among all such pairs, the total slot price is
// minimal (the buyer-optimal corner).
struct DualPrices {
    std::vector<double> ad_surplus;
    std::vector<double> slot_price;
};

struct LayoutChoice {
    int layout_index = -1;
    double objective = 0.0;
    std::vector<double> ctr;  // per advertiser, zero-bid advertisers zeroed
};

// Maximum-weight assignment of advertisers to slots, at most one each way.
// Pair (i,l) carries weight bid_i*p(i,l) + q(i,l); only pairs with positive
// weight and positive bid are ever assigned. Ties between optimal matchings are
// broken toward the lexicographically smallest slot_of vector (unassigned
// sorts after every real slot). Throws std::invalid_argument on dimension
// mismatch, negative or non-finite bids.
Matching solve_assignment(const ClickMatrix& cm, const std::vector<double>& bids);

// Brute-force assignment oracle with identical tie-break semantics, safe for
// small instances only (factorial enumeration).
Matching enumerate_matchings(const ClickMatrix& cm, const std::vector<double>& bids);

// Minimal dual prices for the matching found by solve_assignment. Requires all
// benefits zero. A feasibility/minimality defect beyond the numeric tolerance
// throws std::runtime_error.
DualPrices solve_dual(const ClickMatrix& cm, const std::vector<double>& bids,
                      const Matching& m);

// Chooses the layout maximizing sum_i bid_i * ctr_of[i]; exact ties go to the
// earlier layout id (then lower index). Zero-bid advertisers never collect
// clicks: their entries in the returned ctr are zeroed.
LayoutChoice solve_layout_auction(const std::vector<Layout>& layouts,
                                  const std::vector<double>& bids);

// Page-choice auction between slot arrangements of text adverts and a set of
// full-page image adverts. Text adverts are assigned by solve_assignment; each
// image k (click probability image_ctr[k], bid image_bids[k]) occupies the
// whole page alone. Returns the better of the two, image_index = -1 when the
// text arrangement wins.
struct ImageTextChoice {
    bool image_chosen = false;
    int image_index = -1;
    double objective = 0.0;
    Matching text;  // meaningful when the text arrangement wins
};
ImageTextChoice solve_image_text(const ClickMatrix& text_cm,
                                 const std::vector<double>& text_bids,
                                 const std::vector<double>& image_ctr,
                                 const std::vector<double>& image_bids);

} // namespace adsim
