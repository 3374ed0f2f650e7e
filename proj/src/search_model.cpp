#include "adsim/search_model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "adsim/matching.hpp"
#include "adsim/parallel.hpp"
#include "adsim/rng.hpp"

namespace adsim {

namespace {

int categories_of(const SchemeList& schemes, int i) {
    if (schemes.empty() || !schemes[static_cast<size_t>(i)]) return 1;
    return schemes[static_cast<size_t>(i)]->n_categories;
}

// Offsets into the flattened (advertiser, category) accumulator layout.
struct Dims {
    std::vector<int> offset;  // size n_ads + 1
    int total = 0;
};

Dims make_dims(const BidProfile& bids, const SchemeList& schemes) {
    const int I = bids.n_ads();
    if (!schemes.empty() && static_cast<int>(schemes.size()) != I)
        throw std::invalid_argument("scheme list does not match advertiser count");
    Dims d;
    d.offset.assign(I + 1, 0);
    for (int i = 0; i < I; ++i) {
        int K = categories_of(schemes, i);
        if (static_cast<int>(bids.per_category[i].size()) != K)
            throw std::invalid_argument("bid vector does not match category count");
        if (!schemes.empty() && schemes[i]) schemes[i]->validate();
        d.offset[i + 1] = d.offset[i] + K;
    }
    d.total = d.offset[I];
    return d;
}

int category_for(const SchemeList& schemes, int i, const ClickMatrix& cm) {
    if (categories_of(schemes, i) == 1) return 0;
    const CategoryScheme& sc = *schemes[static_cast<size_t>(i)];
    if (cm.atom < 0 || cm.atom >= static_cast<int>(sc.category_of_atom.size()))
        throw std::invalid_argument("instance atom outside the category map");
    return sc.category_of_atom[static_cast<size_t>(cm.atom)];
}

// Resolves per-instance flat bids, solves, and adds each advertiser's rate
// into acc at its (advertiser, category) slot; squares go into acc2 when given.
void accumulate_instance(const ClickMatrix& cm, const BidProfile& bids,
                         const SchemeList& schemes, const Dims& dims,
                         std::vector<double>& flat, double* acc, double* acc2) {
    const int I = bids.n_ads();
    flat.resize(static_cast<size_t>(I));
    for (int i = 0; i < I; ++i)
        flat[static_cast<size_t>(i)] =
            bids.per_category[i][static_cast<size_t>(category_for(schemes, i, cm))];
    Matching m = solve_assignment(cm, flat);
    for (int i = 0; i < I; ++i) {
        double y = m.ctr[static_cast<size_t>(i)];
        int slot = dims.offset[i] + category_for(schemes, i, cm);
        acc[slot] += y;
        if (acc2) acc2[slot] += y * y;
    }
}

CtrEstimate finalize(const Dims& dims, const BidProfile& bids,
                     const std::vector<double>& sum,
                     const std::vector<double>& sumsq, std::int64_t n,
                     std::uint64_t seed) {
    CtrEstimate est;
    est.n_samples = n;
    est.seed = seed;
    const int I = bids.n_ads();
    est.y_hat.resize(static_cast<size_t>(I));
    est.std_err.resize(static_cast<size_t>(I));
    for (int i = 0; i < I; ++i) {
        int K = dims.offset[i + 1] - dims.offset[i];
        est.y_hat[i].resize(static_cast<size_t>(K));
        est.std_err[i].resize(static_cast<size_t>(K));
        for (int k = 0; k < K; ++k) {
            double s = sum[static_cast<size_t>(dims.offset[i] + k)];
            double s2 = sumsq[static_cast<size_t>(dims.offset[i] + k)];
            double mean = s / static_cast<double>(n);
            double se = 0.0;
            if (n >= 2) {
                double var = (s2 - s * mean) / static_cast<double>(n - 1);
                se = std::sqrt(std::max(0.0, var) / static_cast<double>(n));
            }
            est.y_hat[i][static_cast<size_t>(k)] = mean;
            est.std_err[i][static_cast<size_t>(k)] = se;
        }
    }
    return est;
}

// Shared Monte Carlo driver: instance(index) supplies the click matrix.
CtrEstimate run_estimate(
    const std::function<ClickMatrix(std::int64_t)>& instance,
    const BidProfile& bids, const SchemeList& schemes, std::int64_t n,
    std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("need at least one sample");
    bids.validate();
    Dims dims = make_dims(bids, schemes);
    const std::int64_t n_blocks = (n + kDefaultBlock - 1) / kDefaultBlock;
    std::vector<std::vector<double>> bsum(static_cast<size_t>(n_blocks));
    std::vector<std::vector<double>> bsumsq(static_cast<size_t>(n_blocks));
    parallel_blocks(n, kDefaultBlock,
                    [&](std::int64_t b, std::int64_t lo, std::int64_t hi) {
        auto& s = bsum[static_cast<size_t>(b)];
        auto& s2 = bsumsq[static_cast<size_t>(b)];
        s.assign(static_cast<size_t>(dims.total), 0.0);
        s2.assign(static_cast<size_t>(dims.total), 0.0);
        std::vector<double> flat;
        for (std::int64_t idx = lo; idx < hi; ++idx)
            accumulate_instance(instance(idx), bids, schemes, dims, flat,
                                s.data(), s2.data());
    });
    std::vector<double> sum(static_cast<size_t>(dims.total), 0.0);
    std::vector<double> sumsq(static_cast<size_t>(dims.total), 0.0);
    for (std::int64_t b = 0; b < n_blocks; ++b)
        for (int d = 0; d < dims.total; ++d) {
            sum[static_cast<size_t>(d)] += bsum[static_cast<size_t>(b)][static_cast<size_t>(d)];
            sumsq[static_cast<size_t>(d)] += bsumsq[static_cast<size_t>(b)][static_cast<size_t>(d)];
        }
    return finalize(dims, bids, sum, sumsq, n, seed);
}

} // namespace

void TypeDistribution::validate() const {
    if (n_ads < 1) throw std::invalid_argument("need at least one advertiser");
    switch (kind) {
        case DistKind::ordered_polytope_uniform:
            if (n_slots < 1) throw std::invalid_argument("need at least one slot");
            if (!(scale > 0.0) || scale > 1.0)
                throw std::invalid_argument("polytope scale must lie in (0,1]");
            break;
        case DistKind::product_form: {
            if (slot_effects.empty())
                throw std::invalid_argument("product form needs slot effects");
            for (size_t l = 0; l < slot_effects.size(); ++l) {
                if (!(slot_effects[l] > 0.0))
                    throw std::invalid_argument("slot effects must be positive");
                if (l > 0 && !(slot_effects[l] < slot_effects[l - 1]))
                    throw std::invalid_argument("slot effects must strictly decrease");
            }
            if (static_cast<int>(ad_effects.size()) != n_ads)
                throw std::invalid_argument("ad effects do not match advertiser count");
            for (const AdEffect& e : ad_effects) {
                double mx = e.is_constant ? e.value : e.hi;
                double mn = e.is_constant ? e.value : e.lo;
                if (!(mn >= 0.0) || (!e.is_constant && !(e.lo <= e.hi)))
                    throw std::invalid_argument("ad effect range invalid");
                if (mx * slot_effects[0] > 1.0 + 1e-12)
                    throw std::invalid_argument("product-form probabilities exceed 1");
            }
            break;
        }
        case DistKind::single_slot_independent:
            if (static_cast<int>(ranges.size()) != n_ads)
                throw std::invalid_argument("ranges do not match advertiser count");
            for (auto [lo, hi] : ranges)
                if (!(lo >= 0.0) || !(lo <= hi) || !(hi <= 1.0))
                    throw std::invalid_argument("range outside [0,1]");
            break;
        case DistKind::finite_mixture: {
            if (atoms.empty()) throw std::invalid_argument("mixture needs atoms");
            double total = 0.0;
            for (const MixtureAtom& a : atoms) {
                if (!(a.weight > 0.0))
                    throw std::invalid_argument("atom weights must be positive");
                total += a.weight;
                a.matrix.validate();
                if (a.matrix.n_ads != n_ads)
                    throw std::invalid_argument("atom advertiser count mismatch");
                if (reserve && a.matrix.has_benefits())
                    throw std::invalid_argument(
                        "reserve policy conflicts with atom benefits");
            }
            if (std::abs(total - 1.0) > 1e-9)
                throw std::invalid_argument("atom weights must sum to 1");
            break;
        }
    }
    if (reserve) {
        if (!(reserve->reserve_R >= 0.0))
            throw std::invalid_argument("reserve must be nonnegative");
        if (!(reserve->epsilon_no_reserve >= 0.0) ||
            !(reserve->epsilon_no_reserve <= 1.0))
            throw std::invalid_argument("reserve probability outside [0,1]");
    }
}

int TypeDistribution::max_slots() const {
    switch (kind) {
        case DistKind::ordered_polytope_uniform: return n_slots;
        case DistKind::product_form: return static_cast<int>(slot_effects.size());
        case DistKind::single_slot_independent: return 1;
        case DistKind::finite_mixture: {
            int mx = 0;
            for (const MixtureAtom& a : atoms) mx = std::max(mx, a.matrix.n_slots);
            return mx;
        }
    }
    return 0;
}

ClickMatrix sample_click_matrix(const TypeDistribution& dist,
                                std::uint64_t seed, std::uint64_t index) {
    dist.validate();
    Philox rng = make_rng(seed, StreamKind::instance, index);
    ClickMatrix cm;
    switch (dist.kind) {
        case DistKind::ordered_polytope_uniform: {
            cm = ClickMatrix(dist.n_ads, dist.n_slots);
            std::vector<double> row(static_cast<size_t>(dist.n_slots));
            for (int i = 0; i < dist.n_ads; ++i) {
                for (double& x : row) x = rng.uniform(0.0, dist.scale);
                std::sort(row.begin(), row.end(), std::greater<>());
                for (int l = 0; l < dist.n_slots; ++l) cm.p(i, l) = row[static_cast<size_t>(l)];
            }
            break;
        }
        case DistKind::product_form: {
            const int L = static_cast<int>(dist.slot_effects.size());
            cm = ClickMatrix(dist.n_ads, L);
            for (int i = 0; i < dist.n_ads; ++i) {
                const AdEffect& e = dist.ad_effects[static_cast<size_t>(i)];
                double q = e.is_constant ? e.value : rng.uniform(e.lo, e.hi);
                for (int l = 0; l < L; ++l)
                    cm.p(i, l) = q * dist.slot_effects[static_cast<size_t>(l)];
            }
            break;
        }
        case DistKind::single_slot_independent: {
            cm = ClickMatrix(dist.n_ads, 1);
            for (int i = 0; i < dist.n_ads; ++i) {
                auto [lo, hi] = dist.ranges[static_cast<size_t>(i)];
                cm.p(i, 0) = rng.uniform(lo, hi);
            }
            break;
        }
        case DistKind::finite_mixture: {
            double u = rng.uniform01();
            double cum = 0.0;
            size_t pick = dist.atoms.size() - 1;
            for (size_t a = 0; a < dist.atoms.size(); ++a) {
                cum += dist.atoms[a].weight;
                if (u < cum) { pick = a; break; }
            }
            cm = dist.atoms[pick].matrix;
            cm.atom = static_cast<int>(pick);
            break;
        }
    }
    if (dist.reserve) {
        // Separate stream: toggling the policy leaves the matrix draw intact.
        Philox rr = make_rng(seed, StreamKind::reserve, index);
        if (rr.uniform01() >= dist.reserve->epsilon_no_reserve)
            for (int i = 0; i < cm.n_ads; ++i)
                for (int l = 0; l < cm.n_slots; ++l)
                    cm.set_benefit(i, l, -dist.reserve->reserve_R);
    }
    return cm;
}

std::vector<double> CtrEstimate::flat_y() const {
    std::vector<double> out;
    out.reserve(y_hat.size());
    for (const auto& row : y_hat) {
        if (row.size() != 1)
            throw std::invalid_argument("estimate is per-category");
        out.push_back(row[0]);
    }
    return out;
}

std::vector<double> CtrEstimate::flat_se() const {
    std::vector<double> out;
    out.reserve(std_err.size());
    for (const auto& row : std_err) {
        if (row.size() != 1)
            throw std::invalid_argument("estimate is per-category");
        out.push_back(row[0]);
    }
    return out;
}

CtrEstimate estimate_ctr(const TypeDistribution& dist, const BidProfile& bids,
                         std::int64_t n, std::uint64_t seed,
                         std::uint64_t stream_offset, const SchemeList& schemes) {
    dist.validate();
    if (bids.n_ads() != dist.n_ads)
        throw std::invalid_argument("bid profile does not match advertiser count");
    return run_estimate(
        [&](std::int64_t idx) {
            return sample_click_matrix(dist, seed,
                                       stream_offset + static_cast<std::uint64_t>(idx));
        },
        bids, schemes, n, seed);
}

std::vector<std::vector<double>> exact_ctr(const TypeDistribution& dist,
                                           const BidProfile& bids,
                                           const SchemeList& schemes) {
    dist.validate();
    if (dist.kind != DistKind::finite_mixture)
        throw std::invalid_argument("exact rates need a finite mixture");
    if (bids.n_ads() != dist.n_ads)
        throw std::invalid_argument("bid profile does not match advertiser count");
    bids.validate();
    Dims dims = make_dims(bids, schemes);
    std::vector<double> acc(static_cast<size_t>(dims.total), 0.0);
    std::vector<double> flat;
    double eps = dist.reserve ? dist.reserve->epsilon_no_reserve : 1.0;
    for (size_t a = 0; a < dist.atoms.size(); ++a) {
        ClickMatrix cm = dist.atoms[a].matrix;
        cm.atom = static_cast<int>(a);
        double w = dist.atoms[a].weight;
        if (eps > 0.0) {
            std::vector<double> part(static_cast<size_t>(dims.total), 0.0);
            accumulate_instance(cm, bids, schemes, dims, flat, part.data(), nullptr);
            for (int d = 0; d < dims.total; ++d)
                acc[static_cast<size_t>(d)] += w * eps * part[static_cast<size_t>(d)];
        }
        if (eps < 1.0) {
            for (int i = 0; i < cm.n_ads; ++i)
                for (int l = 0; l < cm.n_slots; ++l)
                    cm.set_benefit(i, l, -dist.reserve->reserve_R);
            std::vector<double> part(static_cast<size_t>(dims.total), 0.0);
            accumulate_instance(cm, bids, schemes, dims, flat, part.data(), nullptr);
            for (int d = 0; d < dims.total; ++d)
                acc[static_cast<size_t>(d)] += w * (1.0 - eps) * part[static_cast<size_t>(d)];
        }
    }
    std::vector<std::vector<double>> out(static_cast<size_t>(bids.n_ads()));
    for (int i = 0; i < bids.n_ads(); ++i) {
        int K = dims.offset[i + 1] - dims.offset[i];
        out[static_cast<size_t>(i)].assign(
            acc.begin() + dims.offset[i], acc.begin() + dims.offset[i] + K);
    }
    return out;
}

InstancePool sample_pool(const TypeDistribution& dist, std::int64_t n,
                         std::uint64_t seed, std::uint64_t stream_offset) {
    if (n < 1) throw std::invalid_argument("need at least one sample");
    dist.validate();
    InstancePool pool;
    pool.seed = seed;
    pool.stream_offset = stream_offset;
    pool.instances.resize(static_cast<size_t>(n));
    parallel_blocks(n, kDefaultBlock,
                    [&](std::int64_t, std::int64_t lo, std::int64_t hi) {
        for (std::int64_t idx = lo; idx < hi; ++idx)
            pool.instances[static_cast<size_t>(idx)] = sample_click_matrix(
                dist, seed, stream_offset + static_cast<std::uint64_t>(idx));
    });
    return pool;
}

CtrEstimate ctr_on_pool(const InstancePool& pool, const BidProfile& bids,
                        const SchemeList& schemes) {
    return run_estimate(
        [&](std::int64_t idx) { return pool.instances[static_cast<size_t>(idx)]; },
        bids, schemes, static_cast<std::int64_t>(pool.instances.size()),
        pool.seed);
}

ProbeCurve monotonicity_probe(const TypeDistribution& dist,
                              const BidProfile& base_bids, int advertiser,
                              const std::vector<double>& grid, std::int64_t n,
                              std::uint64_t seed) {
    dist.validate();
    base_bids.validate();
    if (!base_bids.is_flat())
        throw std::invalid_argument("probe needs flat bids");
    if (advertiser < 0 || advertiser >= base_bids.n_ads())
        throw std::invalid_argument("advertiser index out of range");
    if (grid.empty()) throw std::invalid_argument("empty bid grid");
    for (size_t k = 0; k < grid.size(); ++k) {
        if (!(grid[k] >= 0.0))
            throw std::invalid_argument("grid bids must be nonnegative");
        if (k > 0 && !(grid[k] > grid[k - 1]))
            throw std::invalid_argument("grid must strictly increase");
    }
    bool competitor = false;
    for (int j = 0; j < base_bids.n_ads(); ++j)
        if (j != advertiser && base_bids.per_category[j][0] > 0.0) competitor = true;
    if (!competitor)
        throw std::invalid_argument("probe needs a positive competing bid");

    ProbeCurve curve;
    curve.grid = grid;
    std::vector<double> bids = base_bids.flat_bids();
    for (double b : grid) {
        bids[static_cast<size_t>(advertiser)] = b;
        CtrEstimate est = estimate_ctr(dist, BidProfile::flat(bids), n, seed);
        curve.y_hat.push_back(est.y_hat[static_cast<size_t>(advertiser)][0]);
        curve.std_err.push_back(est.std_err[static_cast<size_t>(advertiser)][0]);
    }
    curve.strictly_increasing = true;
    for (size_t k = 0; k + 1 < curve.y_hat.size(); ++k) {
        if (!(curve.y_hat[k + 1] > curve.y_hat[k])) {
            curve.strictly_increasing = false;
            ++curve.flat_segments;
        }
    }
    if (curve.y_hat.size() < 2) curve.strictly_increasing = false;
    return curve;
}

} // namespace adsim
