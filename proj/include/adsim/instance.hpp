#pragma once

#include <string>
#include <vector>

namespace adsim {

// Click probabilities for one realized search: p(i,l) is the chance advertiser
// i is clicked when shown in slot l. Optional per-pair benefits enter the
// assignment objective additively (reserve prices are negative benefits,
// uniform across pairs).
struct ClickMatrix {
    int n_ads = 0;
    int n_slots = 0;
    std::vector<double> probs;     // row-major, n_ads * n_slots
    std::vector<double> benefits;  // empty means all zero
    int atom = -1;                 // index into a finite support, -1 otherwise

    ClickMatrix() = default;
    ClickMatrix(int ads, int slots)
        : n_ads(ads), n_slots(slots), probs(static_cast<size_t>(ads) * slots, 0.0) {}

    double p(int i, int l) const { return probs[static_cast<size_t>(i) * n_slots + l]; }
    double& p(int i, int l) { return probs[static_cast<size_t>(i) * n_slots + l]; }
    double q(int i, int l) const {
        return benefits.empty() ? 0.0 : benefits[static_cast<size_t>(i) * n_slots + l];
    }
    bool has_benefits() const { return !benefits.empty(); }
    void set_benefit(int i, int l, double v) {
        if (benefits.empty()) benefits.assign(probs.size(), 0.0);
        benefits[static_cast<size_t>(i) * n_slots + l] = v;
    }

    // Throws std::invalid_argument on shape mismatch, probabilities outside
    // [0,1], or non-finite entries.
    void validate() const;
};

// One page arrangement in a layout auction: shows each advertiser with a fixed
// click probability (zero when the layout omits the advertiser).
struct Layout {
    std::string id;
    std::vector<double> ctr_of;  // per advertiser
};

} // namespace adsim
