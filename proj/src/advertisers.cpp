#include "adsim/advertisers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace adsim {

namespace {

void require_positive(const std::vector<double>& v, const char* what) {
    for (double x : v)
        if (!(x > 0.0) || !std::isfinite(x))
            throw std::invalid_argument(std::string(what) + " must be positive and finite");
}

double scalar_value(const UtilityFamily& u, double y) {
    if (u.kind == UtilityKind::log_utility) return u.weight * std::log(y);
    return u.weight * std::pow(y, 1.0 - u.elasticity) / (1.0 - u.elasticity);
}

double scalar_marginal(const UtilityFamily& u, double y) {
    if (u.kind == UtilityKind::log_utility) return u.weight / y;
    return u.weight * std::pow(y, -u.elasticity);
}

double scalar_demand(const UtilityFamily& u, double xi) {
    if (u.kind == UtilityKind::log_utility) return u.weight / xi;
    return std::pow(xi / u.weight, -1.0 / u.elasticity);
}

double scalar_surplus(const UtilityFamily& u, double xi) {
    if (u.kind == UtilityKind::log_utility)
        return u.weight * (std::log(u.weight) - std::log(xi) - 1.0);
    double a = u.elasticity;
    return a / (1.0 - a) * std::pow(u.weight, 1.0 / a) * std::pow(xi, 1.0 - 1.0 / a);
}

void check_len(const AdvertiserProfile& p, const std::vector<double>& v,
               const char* what) {
    if (static_cast<int>(v.size()) != p.n_categories())
        throw std::invalid_argument(std::string(what) + " length does not match category count");
}

} // namespace

void CategoryScheme::validate() const {
    if (n_categories < 1) throw std::invalid_argument("need at least one category");
    for (int k : category_of_atom)
        if (k < 0 || k >= n_categories)
            throw std::invalid_argument("atom category out of range");
}

void AdvertiserProfile::validate() const {
    if (categories) categories->validate();
    const UtilityFamily& u = utility;
    switch (u.kind) {
        case UtilityKind::log_utility:
            if (!(u.weight > 0.0)) throw std::invalid_argument("utility weight must be positive");
            break;
        case UtilityKind::isoelastic:
            if (!(u.weight > 0.0)) throw std::invalid_argument("utility weight must be positive");
            if (!(u.elasticity > 0.0) || u.elasticity == 1.0)
                throw std::invalid_argument("elasticity must be positive and not 1");
            break;
        case UtilityKind::budget_ces:
            if (!(u.budget > 0.0)) throw std::invalid_argument("budget must be positive");
            if (!(u.ces_exponent > 0.0) || !(u.ces_exponent < 1.0))
                throw std::invalid_argument("ces exponent must lie in (0,1)");
            if (!categories)
                throw std::invalid_argument("budget utility needs categories");
            if (static_cast<int>(u.ces_weights.size()) != n_categories())
                throw std::invalid_argument("ces weights do not match category count");
            require_positive(u.ces_weights, "ces weights");
            if (!weights.empty())
                throw std::invalid_argument("budget utility carries its own weights");
            break;
    }
    if (!weights.empty()) {
        if (!categories)
            throw std::invalid_argument("weighted-sum profile needs categories");
        if (static_cast<int>(weights.size()) != n_categories())
            throw std::invalid_argument("weights do not match category count");
        require_positive(weights, "weights");
    }
    if (categories && categories->n_categories > 1 &&
        utility.kind != UtilityKind::budget_ces && weights.empty())
        throw std::invalid_argument(
            "multi-category profile needs weights or a budget utility");
}

BidProfile BidProfile::flat(std::vector<double> bids) {
    BidProfile bp;
    bp.per_category.reserve(bids.size());
    for (double b : bids) bp.per_category.push_back({b});
    bp.validate();
    return bp;
}

BidProfile BidProfile::from_declared(
    const std::vector<double>& declared,
    const std::vector<std::vector<double>>& declared_weights) {
    if (declared.size() != declared_weights.size())
        throw std::invalid_argument("declared bids/weights size mismatch");
    BidProfile bp;
    bp.per_category.resize(declared.size());
    for (size_t i = 0; i < declared.size(); ++i) {
        bp.per_category[i].reserve(declared_weights[i].size());
        for (double w : declared_weights[i])
            bp.per_category[i].push_back(declared[i] * w);
    }
    bp.validate();
    return bp;
}

bool BidProfile::is_flat() const {
    for (const auto& row : per_category)
        if (row.size() != 1) return false;
    return true;
}

std::vector<double> BidProfile::flat_bids() const {
    if (!is_flat()) throw std::invalid_argument("bid profile is per-category");
    std::vector<double> out;
    out.reserve(per_category.size());
    for (const auto& row : per_category) out.push_back(row[0]);
    return out;
}

void BidProfile::validate() const {
    for (const auto& row : per_category) {
        if (row.empty()) throw std::invalid_argument("advertiser with no bids");
        for (double b : row)
            if (!std::isfinite(b) || b < 0.0)
                throw std::invalid_argument("bids must be finite and nonnegative");
    }
}

double utility_value(const AdvertiserProfile& p, const std::vector<double>& y) {
    p.validate();
    check_len(p, y, "rate vector");
    require_positive(y, "rates");
    if (p.utility.kind == UtilityKind::budget_ces) {
        const UtilityFamily& u = p.utility;
        double s = 0.0;
        for (size_t k = 0; k < y.size(); ++k)
            s += std::pow(u.ces_weights[k] * y[k], u.ces_exponent);
        return u.budget / u.ces_exponent * std::log(s);
    }
    if (p.weighted_sum()) {
        double z = 0.0;
        for (size_t k = 0; k < y.size(); ++k) z += p.weights[k] * y[k];
        return scalar_value(p.utility, z);
    }
    return scalar_value(p.utility, y[0]);
}

std::vector<double> marginal_utility(const AdvertiserProfile& p,
                                     const std::vector<double>& y) {
    p.validate();
    check_len(p, y, "rate vector");
    require_positive(y, "rates");
    std::vector<double> g(y.size());
    if (p.utility.kind == UtilityKind::budget_ces) {
        const UtilityFamily& u = p.utility;
        double s = 0.0;
        for (size_t k = 0; k < y.size(); ++k)
            s += std::pow(u.ces_weights[k] * y[k], u.ces_exponent);
        for (size_t k = 0; k < y.size(); ++k)
            g[k] = u.budget * std::pow(u.ces_weights[k], u.ces_exponent) *
                   std::pow(y[k], u.ces_exponent - 1.0) / s;
        return g;
    }
    if (p.weighted_sum()) {
        double z = 0.0;
        for (size_t k = 0; k < y.size(); ++k) z += p.weights[k] * y[k];
        double du = scalar_marginal(p.utility, z);
        for (size_t k = 0; k < y.size(); ++k) g[k] = p.weights[k] * du;
        return g;
    }
    g[0] = scalar_marginal(p.utility, y[0]);
    return g;
}

std::vector<double> demand(const AdvertiserProfile& p,
                           const std::vector<double>& price) {
    p.validate();
    check_len(p, price, "price vector");
    require_positive(price, "prices");
    if (p.weighted_sum())
        throw std::invalid_argument(
            "demand is set-valued for weighted-sum profiles");
    std::vector<double> y(price.size());
    if (p.utility.kind == UtilityKind::budget_ces) {
        const UtilityFamily& u = p.utility;
        double e = 1.0 / (1.0 - u.ces_exponent);
        double z = 0.0;
        for (size_t k = 0; k < price.size(); ++k)
            z += std::pow(u.ces_weights[k] / price[k], u.ces_exponent * e);
        for (size_t k = 0; k < price.size(); ++k)
            y[k] = u.budget *
                   std::pow(std::pow(u.ces_weights[k], u.ces_exponent) / price[k], e) / z;
        return y;
    }
    y[0] = scalar_demand(p.utility, price[0]);
    return y;
}

double surplus(const AdvertiserProfile& p, const std::vector<double>& price) {
    p.validate();
    check_len(p, price, "price vector");
    require_positive(price, "prices");
    if (p.utility.kind == UtilityKind::budget_ces) {
        const UtilityFamily& u = p.utility;
        double e = u.ces_exponent / (1.0 - u.ces_exponent);
        double z = 0.0;
        for (size_t k = 0; k < price.size(); ++k)
            z += std::pow(u.ces_weights[k] / price[k], e);
        return u.budget * std::log(u.budget) +
               u.budget * (1.0 - u.ces_exponent) / u.ces_exponent * std::log(z) -
               u.budget;
    }
    if (p.weighted_sum()) {
        // Spend is routed through the cheapest effective category, so the
        // conjugate reduces to the scalar one at min_k price_k / weight_k.
        double xi = price[0] / p.weights[0];
        for (size_t k = 1; k < price.size(); ++k)
            xi = std::min(xi, price[k] / p.weights[k]);
        return scalar_surplus(p.utility, xi);
    }
    return scalar_surplus(p.utility, price[0]);
}

} // namespace adsim
