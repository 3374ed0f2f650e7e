#pragma once

#include <optional>
#include <vector>

namespace adsim {

enum class UtilityKind { log_utility, isoelastic, budget_ces };

// Assigns each type atom of a finite-mixture distribution to a category.
struct CategoryScheme {
    int n_categories = 1;
    std::vector<int> category_of_atom;
    void validate() const;
};

struct UtilityFamily {
    UtilityKind kind = UtilityKind::log_utility;
    double weight = 1.0;        // scale for log / isoelastic
    double elasticity = 2.0;    // curvature a for isoelastic, a > 0, a != 1
    double budget = 1.0;        // spend target B for budget_ces
    double ces_exponent = 0.5;  // q in (0,1) for budget_ces
    std::vector<double> ces_weights;  // per-category weights for budget_ces
};

// One advertiser's preferences. Three shapes:
//  - scalar: log/isoelastic utility of the total click-through rate;
//  - weighted-sum: scalar utility of sum_k weights[k] * y_k over categories;
//  - budget_ces: multivariate CES utility over categories.
struct AdvertiserProfile {
    UtilityFamily utility;
    std::optional<CategoryScheme> categories;
    std::vector<double> weights;  // weighted-sum only; empty otherwise

    int n_categories() const {
        return categories ? categories->n_categories : 1;
    }
    bool weighted_sum() const {
        return utility.kind != UtilityKind::budget_ces && !weights.empty();
    }
    void validate() const;
};

// Bids per advertiser: one entry for flat bidders, one per category otherwise.
struct BidProfile {
    std::vector<std::vector<double>> per_category;

    static BidProfile flat(std::vector<double> bids);
    // Expands declared (scalar bid, per-category weights) pairs multiplicatively.
    static BidProfile from_declared(
        const std::vector<double>& declared,
        const std::vector<std::vector<double>>& declared_weights);

    int n_ads() const { return static_cast<int>(per_category.size()); }
    bool is_flat() const;
    std::vector<double> flat_bids() const;
    void validate() const;
};

// U(y); y has one component per category.
double utility_value(const AdvertiserProfile& p, const std::vector<double>& y);

// Gradient of U at y > 0.
std::vector<double> marginal_utility(const AdvertiserProfile& p,
                                     const std::vector<double>& y);

// Inverse of the gradient: the unique y with marginal_utility(y) = price.
// Weighted-sum profiles have set-valued demand and are rejected.
std::vector<double> demand(const AdvertiserProfile& p,
                           const std::vector<double>& price);

// Conjugate max_y U(y) - <price, y> (log families: up to an additive constant).
double surplus(const AdvertiserProfile& p, const std::vector<double>& price);

} // namespace adsim
