#include "adsim/pricing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "adsim/parallel.hpp"

namespace adsim {

namespace {

// Value and own-rate of the assignment at one own-bid level.
struct Support {
    double y = 0.0;  // advertiser's rate: the slope of the value in the bid
    double g = 0.0;  // assignment value
};

Support solve_at(const ClickMatrix& cm, std::vector<double>& bids, int i,
                 double b) {
    bids[static_cast<size_t>(i)] = b;
    Matching m = solve_assignment(cm, bids);
    return {m.ctr[static_cast<size_t>(i)], m.objective};
}

// Integral of the piecewise-constant rate curve b' -> y(b') over [lo, hi].
// The assignment value is piecewise linear and convex in the bid with slope
// y(b'), so pieces are found by intersecting the supporting lines at the ends
// and testing whether the value at the intersection lies on both.
double integral_rate(const ClickMatrix& cm, std::vector<double>& bids, int i,
                     double lo, double hi, Support slo, Support shi,
                     double tol, int depth) {
    if (hi - lo <= 1e-15 * std::max(1.0, hi)) return 0.0;
    if (std::abs(shi.y - slo.y) <= 1e-13) return shi.g - slo.g;  // one piece
    double clo = slo.g - slo.y * lo;
    double chi = shi.g - shi.y * hi;
    double m = std::clamp((clo - chi) / (shi.y - slo.y), lo, hi);
    double line_lo = slo.y * m + clo;
    double line_hi = shi.y * m + chi;
    if (m - lo <= 1e-15 * std::max(1.0, hi) ||
        hi - m <= 1e-15 * std::max(1.0, hi))
        return (line_lo - slo.g) + (shi.g - line_hi);
    Support sm = solve_at(cm, bids, i, m);
    if ((std::abs(sm.g - line_lo) <= tol && std::abs(sm.g - line_hi) <= tol) ||
        depth <= 0)
        return (line_lo - slo.g) + (shi.g - line_hi);
    return integral_rate(cm, bids, i, lo, m, slo, sm, tol, depth - 1) +
           integral_rate(cm, bids, i, m, hi, sm, shi, tol, depth - 1);
}

} // namespace

void ClickEvent::validate() const {
    instance.validate();
    bids.validate();
    if (!bids.is_flat())
        throw std::invalid_argument("click events carry flat bids");
    if (bids.n_ads() != instance.n_ads)
        throw std::invalid_argument("bids do not match instance");
    if (advertiser < 0 || advertiser >= instance.n_ads)
        throw std::invalid_argument("clicked advertiser out of range");
    if (slot < 0 || slot >= instance.n_slots)
        throw std::invalid_argument("clicked slot out of range");
    if (!(bids.per_category[static_cast<size_t>(advertiser)][0] > 0.0))
        throw std::invalid_argument("clicked advertiser must bid positively");
    Matching m = solve_assignment(instance, bids.flat_bids());
    if (m.slot_of[static_cast<size_t>(advertiser)] != slot)
        throw std::invalid_argument("clicked pair is not assigned");
}

ChargeBreakdown randomized_charge(const ClickEvent& ev, Philox& rng) {
    ev.validate();
    std::vector<double> bids = ev.bids.flat_bids();
    const int i = ev.advertiser;
    double b = bids[static_cast<size_t>(i)];
    double y_base = ev.instance.p(i, ev.slot);
    if (!(y_base > 0.0))
        throw std::invalid_argument("clicked advertiser has zero click rate");
    double b_draw = rng.uniform(0.0, b);
    Support s = solve_at(ev.instance, bids, i, b_draw);
    ChargeBreakdown out;
    out.scheme = ChargeScheme::randomized;
    out.charge = b * (1.0 - s.y / y_base);
    out.rebate = b - out.charge;
    return out;
}

ChargeBreakdown expected_randomized_charge(const ClickEvent& ev) {
    ev.validate();
    std::vector<double> bids = ev.bids.flat_bids();
    const int i = ev.advertiser;
    double b = bids[static_cast<size_t>(i)];
    double y_base = ev.instance.p(i, ev.slot);
    if (!(y_base > 0.0))
        throw std::invalid_argument("clicked advertiser has zero click rate");
    Support slo = solve_at(ev.instance, bids, i, 0.0);
    Support shi = solve_at(ev.instance, bids, i, b);
    double tol = 1e-11 * std::max(1.0, std::abs(shi.g));
    double integral =
        integral_rate(ev.instance, bids, i, 0.0, b, slo, shi, tol, 64);
    ChargeBreakdown out;
    out.scheme = ChargeScheme::randomized;
    out.rebate = integral / y_base;
    out.charge = b - out.rebate;
    return out;
}

ChargeBreakdown vcg_rebate_charge(const ClickEvent& ev) {
    ev.validate();
    std::vector<double> bids = ev.bids.flat_bids();
    const int i = ev.advertiser;
    double b = bids[static_cast<size_t>(i)];
    double y_base = ev.instance.p(i, ev.slot);
    if (!(y_base > 0.0))
        throw std::invalid_argument("clicked advertiser has zero click rate");
    Matching base = solve_assignment(ev.instance, bids);
    double with_i = 0.0;
    for (int j = 0; j < ev.instance.n_ads; ++j)
        with_i += bids[static_cast<size_t>(j)] * base.ctr[static_cast<size_t>(j)];
    bids[static_cast<size_t>(i)] = 0.0;
    Matching drop = solve_assignment(ev.instance, bids);
    double without_i = 0.0;
    for (int j = 0; j < ev.instance.n_ads; ++j)
        if (j != i)
            without_i += bids[static_cast<size_t>(j)] * drop.ctr[static_cast<size_t>(j)];
    ChargeBreakdown out;
    out.scheme = ChargeScheme::vcg_rebate;
    out.rebate = (with_i - without_i) / y_base;
    out.charge = b - out.rebate;
    return out;
}

LeonardPrices leonard_prices(const ClickMatrix& instance,
                             const std::vector<double>& bids) {
    LeonardPrices out;
    out.matching = solve_assignment(instance, bids);
    out.dual = solve_dual(instance, bids, out.matching);
    out.per_impression = out.dual.slot_price;
    out.per_click.assign(static_cast<size_t>(instance.n_ads), 0.0);
    for (int i = 0; i < instance.n_ads; ++i) {
        int l = out.matching.slot_of[static_cast<size_t>(i)];
        if (l < 0) continue;
        double p = instance.p(i, l);
        if (!(p > 0.0))
            throw std::invalid_argument("assigned pair has zero click rate");
        out.per_click[static_cast<size_t>(i)] =
            out.per_impression[static_cast<size_t>(l)] / p;
    }
    return out;
}

void ProductInstance::validate() const {
    if (slot_effects.empty())
        throw std::invalid_argument("product instance needs slot effects");
    double mx_q = 0.0;
    for (double q : ad_effects) {
        if (!std::isfinite(q) || q < 0.0)
            throw std::invalid_argument("ad effects must be nonnegative");
        mx_q = std::max(mx_q, q);
    }
    for (size_t l = 0; l < slot_effects.size(); ++l) {
        if (!(slot_effects[l] > 0.0))
            throw std::invalid_argument("slot effects must be positive");
        if (l > 0 && !(slot_effects[l] < slot_effects[l - 1]))
            throw std::invalid_argument("slot effects must strictly decrease");
    }
    if (mx_q * slot_effects[0] > 1.0 + 1e-12)
        throw std::invalid_argument("product probabilities exceed 1");
}

ClickMatrix ProductInstance::matrix() const {
    validate();
    const int I = static_cast<int>(ad_effects.size());
    const int L = static_cast<int>(slot_effects.size());
    ClickMatrix cm(I, L);
    for (int i = 0; i < I; ++i)
        for (int l = 0; l < L; ++l)
            cm.p(i, l) = ad_effects[static_cast<size_t>(i)] *
                         slot_effects[static_cast<size_t>(l)];
    return cm;
}

GspResult gsp_closed_form(const ProductInstance& inst,
                          const std::vector<double>& bids, std::uint64_t seed) {
    inst.validate();
    const int I = static_cast<int>(inst.ad_effects.size());
    const int L = static_cast<int>(inst.slot_effects.size());
    if (static_cast<int>(bids.size()) != I)
        throw std::invalid_argument("bids do not match advertiser count");
    for (double b : bids)
        if (!std::isfinite(b) || b < 0.0)
            throw std::invalid_argument("bids must be finite and nonnegative");

    // Adjusted bids, descending; exact ties ordered by a seeded shuffle.
    std::vector<int> shuffle_rank(static_cast<size_t>(I));
    std::iota(shuffle_rank.begin(), shuffle_rank.end(), 0);
    Philox rng = make_rng(seed, StreamKind::gsp_tiebreak, 0);
    for (int k = I - 1; k > 0; --k)
        std::swap(shuffle_rank[static_cast<size_t>(k)],
                  shuffle_rank[rng.below(static_cast<std::uint64_t>(k + 1))]);
    std::vector<int> pos(static_cast<size_t>(I));
    for (int k = 0; k < I; ++k) pos[static_cast<size_t>(shuffle_rank[static_cast<size_t>(k)])] = k;

    std::vector<double> beta(static_cast<size_t>(I));
    for (int i = 0; i < I; ++i)
        beta[static_cast<size_t>(i)] = bids[static_cast<size_t>(i)] *
                                       inst.ad_effects[static_cast<size_t>(i)];
    std::vector<int> order;
    for (int i = 0; i < I; ++i)
        if (beta[static_cast<size_t>(i)] > 0.0) order.push_back(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (beta[static_cast<size_t>(a)] != beta[static_cast<size_t>(b)])
            return beta[static_cast<size_t>(a)] > beta[static_cast<size_t>(b)];
        return pos[static_cast<size_t>(a)] < pos[static_cast<size_t>(b)];
    });

    GspResult out;
    out.occupant.assign(static_cast<size_t>(L), -1);
    out.slot_of.assign(static_cast<size_t>(I), -1);
    out.charges.assign(static_cast<size_t>(L), 0.0);
    const int shown = std::min<int>(L, static_cast<int>(order.size()));
    for (int l = 0; l < shown; ++l) {
        out.occupant[static_cast<size_t>(l)] = order[static_cast<size_t>(l)];
        out.slot_of[static_cast<size_t>(order[static_cast<size_t>(l)])] = l;
    }

    // Quality-scaled charges: phi_l = beta_{l+1}(1 - p_{l+1}/p_l)
    //                                 + (p_{l+1}/p_l) phi_{l+1}, p_{L+1} = 0.
    auto beta_at = [&](int rank) {
        return rank < static_cast<int>(order.size())
                   ? beta[static_cast<size_t>(order[static_cast<size_t>(rank)])]
                   : 0.0;
    };
    std::vector<double> phi(static_cast<size_t>(L), 0.0);
    double phi_next = 0.0;
    for (int l = L - 1; l >= 0; --l) {
        double ratio = (l + 1 < L)
                           ? inst.slot_effects[static_cast<size_t>(l + 1)] /
                                 inst.slot_effects[static_cast<size_t>(l)]
                           : 0.0;
        phi[static_cast<size_t>(l)] =
            beta_at(l + 1) * (1.0 - ratio) + ratio * phi_next;
        phi_next = phi[static_cast<size_t>(l)];
    }
    for (int l = 0; l < shown; ++l) {
        int i = out.occupant[static_cast<size_t>(l)];
        out.charges[static_cast<size_t>(l)] =
            phi[static_cast<size_t>(l)] / inst.ad_effects[static_cast<size_t>(i)];
        out.revenue += phi[static_cast<size_t>(l)] *
                       inst.slot_effects[static_cast<size_t>(l)];
    }
    return out;
}

void gauss_legendre_unit(int points, std::vector<double>& nodes,
                         std::vector<double>& weights) {
    if (points < 1) throw std::invalid_argument("need at least one node");
    nodes.resize(static_cast<size_t>(points));
    weights.resize(static_cast<size_t>(points));
    const int n = points;
    for (int k = 0; k < (n + 1) / 2; ++k) {
        double x = std::cos(M_PI * (k + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int j = 2; j <= n; ++j) {
                double p2 = ((2 * j - 1) * x * p1 - (j - 1) * p0) / j;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            double step = p1 / dp;
            x -= step;
            if (std::abs(step) < 1e-15) break;
        }
        double w = 2.0 / ((1.0 - x * x) * dp * dp);
        // Map from (-1,1) to (0,1); cosine guesses descend, so mirror.
        nodes[static_cast<size_t>(k)] = 0.5 * (1.0 - x);
        nodes[static_cast<size_t>(n - 1 - k)] = 0.5 * (1.0 + x);
        weights[static_cast<size_t>(k)] = 0.5 * w;
        weights[static_cast<size_t>(n - 1 - k)] = 0.5 * w;
    }
}

PaymentRate expected_payment_rate(const TypeDistribution& dist,
                                  const BidProfile& bids, int advertiser,
                                  std::int64_t n, int quad_points,
                                  std::uint64_t seed,
                                  std::uint64_t stream_offset) {
    dist.validate();
    bids.validate();
    if (!bids.is_flat())
        throw std::invalid_argument("payment rate needs flat bids");
    if (bids.n_ads() != dist.n_ads)
        throw std::invalid_argument("bids do not match advertiser count");
    if (advertiser < 0 || advertiser >= dist.n_ads)
        throw std::invalid_argument("advertiser index out of range");
    if (n < 2) throw std::invalid_argument("need at least two samples");
    const double b = bids.per_category[static_cast<size_t>(advertiser)][0];
    if (!(b > 0.0))
        throw std::invalid_argument("advertiser must bid positively");

    std::vector<double> nodes, weights;
    gauss_legendre_unit(quad_points, nodes, weights);
    for (double& x : nodes) x *= b;
    for (double& w : weights) w *= b;

    const std::vector<double> base = bids.flat_bids();
    const std::int64_t n_blocks = (n + kDefaultBlock - 1) / kDefaultBlock;
    std::vector<double> bsum(static_cast<size_t>(n_blocks), 0.0);
    std::vector<double> bsumsq(static_cast<size_t>(n_blocks), 0.0);
    parallel_blocks(n, kDefaultBlock,
                    [&](std::int64_t blk, std::int64_t lo, std::int64_t hi) {
        double s = 0.0, s2 = 0.0;
        std::vector<double> work = base;
        for (std::int64_t idx = lo; idx < hi; ++idx) {
            ClickMatrix cm = sample_click_matrix(
                dist, seed, stream_offset + static_cast<std::uint64_t>(idx));
            work = base;
            double v = b * solve_at(cm, work, advertiser, b).y;
            for (size_t k = 0; k < nodes.size(); ++k)
                v -= weights[k] * solve_at(cm, work, advertiser, nodes[k]).y;
            s += v;
            s2 += v * v;
        }
        bsum[static_cast<size_t>(blk)] = s;
        bsumsq[static_cast<size_t>(blk)] = s2;
    });
    double sum = 0.0, sumsq = 0.0;
    for (std::int64_t blk = 0; blk < n_blocks; ++blk) {
        sum += bsum[static_cast<size_t>(blk)];
        sumsq += bsumsq[static_cast<size_t>(blk)];
    }
    PaymentRate out;
    out.n_samples = n;
    out.value = sum / static_cast<double>(n);
    double var = (sumsq - sum * out.value) / static_cast<double>(n - 1);
    out.std_err = std::sqrt(std::max(0.0, var) / static_cast<double>(n));
    return out;
}

} // namespace adsim
