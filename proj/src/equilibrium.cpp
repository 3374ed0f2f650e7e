#include "adsim/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <stdexcept>

#include "adsim/matching.hpp"
#include "adsim/parallel.hpp"

namespace adsim {

namespace {

void check_positive_bids(const BidProfile& bids) {
    for (const auto& row : bids.per_category)
        for (double b : row)
            if (!(b > 0.0))
                throw std::invalid_argument("bids must be strictly positive");
}

void check_profiles(const std::vector<AdvertiserProfile>& profiles,
                    const BidProfile& bids) {
    if (static_cast<int>(profiles.size()) != bids.n_ads())
        throw std::invalid_argument("profiles do not match advertiser count");
    for (size_t i = 0; i < profiles.size(); ++i) {
        profiles[i].validate();
        if (static_cast<int>(bids.per_category[i].size()) !=
            profiles[i].n_categories())
            throw std::invalid_argument("bids do not match category count");
    }
}

// Mean and standard error of the bid-weighted rate sum over instances.
// The callback returns by value so parallel blocks never share a matrix.
DualValue revenue_term(const std::function<ClickMatrix(std::int64_t)>& at,
                       std::int64_t n, const BidProfile& bids,
                       const SchemeList& schemes) {
    const int I = bids.n_ads();
    const std::int64_t n_blocks = (n + kDefaultBlock - 1) / kDefaultBlock;
    std::vector<double> bsum(static_cast<size_t>(n_blocks), 0.0);
    std::vector<double> bsumsq(static_cast<size_t>(n_blocks), 0.0);
    parallel_blocks(n, kDefaultBlock,
                    [&](std::int64_t blk, std::int64_t lo, std::int64_t hi) {
        double s = 0.0, s2 = 0.0;
        std::vector<double> flat(static_cast<size_t>(I));
        for (std::int64_t idx = lo; idx < hi; ++idx) {
            const ClickMatrix cm = at(idx);
            for (int i = 0; i < I; ++i) {
                int k = 0;
                if (!schemes.empty() && schemes[static_cast<size_t>(i)] &&
                    schemes[static_cast<size_t>(i)]->n_categories > 1) {
                    const CategoryScheme& sc = *schemes[static_cast<size_t>(i)];
                    if (cm.atom < 0 ||
                        cm.atom >= static_cast<int>(sc.category_of_atom.size()))
                        throw std::invalid_argument(
                            "instance atom outside the category map");
                    k = sc.category_of_atom[static_cast<size_t>(cm.atom)];
                }
                flat[static_cast<size_t>(i)] =
                    bids.per_category[static_cast<size_t>(i)][static_cast<size_t>(k)];
            }
            Matching m = solve_assignment(cm, flat);
            double r = 0.0;
            for (int i = 0; i < I; ++i)
                r += flat[static_cast<size_t>(i)] * m.ctr[static_cast<size_t>(i)];
            s += r;
            s2 += r * r;
        }
        bsum[static_cast<size_t>(blk)] = s;
        bsumsq[static_cast<size_t>(blk)] = s2;
    });
    double sum = 0.0, sumsq = 0.0;
    for (std::int64_t blk = 0; blk < n_blocks; ++blk) {
        sum += bsum[static_cast<size_t>(blk)];
        sumsq += bsumsq[static_cast<size_t>(blk)];
    }
    DualValue out;
    out.value = sum / static_cast<double>(n);
    if (n >= 2) {
        double var = (sumsq - sum * out.value) / static_cast<double>(n - 1);
        out.std_err = std::sqrt(std::max(0.0, var) / static_cast<double>(n));
    }
    return out;
}

double surplus_total(const std::vector<AdvertiserProfile>& profiles,
                     const BidProfile& bids) {
    double s = 0.0;
    for (size_t i = 0; i < profiles.size(); ++i)
        s += surplus(profiles[i], bids.per_category[i]);
    return s;
}

} // namespace

double dual_value_at(const std::vector<AdvertiserProfile>& profiles,
                     const BidProfile& bids,
                     const std::vector<std::vector<double>>& y_hat) {
    double v = surplus_total(profiles, bids);
    for (size_t i = 0; i < profiles.size(); ++i)
        for (size_t k = 0; k < bids.per_category[i].size(); ++k)
            v += bids.per_category[i][k] * y_hat[i][k];
    return v;
}

double residual_map(const std::vector<AdvertiserProfile>& profiles,
                    const BidProfile& bids,
                    const std::vector<std::vector<double>>& y_hat,
                    double y_floor,
                    std::vector<std::vector<double>>& out) {
    out.assign(profiles.size(), {});
    double worst = 0.0;
    for (size_t i = 0; i < profiles.size(); ++i) {
        const auto& b = bids.per_category[i];
        const auto& y = y_hat[i];
        out[i].assign(b.size(), 0.0);
        if (profiles[i].weighted_sum()) {
            std::vector<double> yc = y;
            for (double& v : yc) v = std::max(v, y_floor);
            std::vector<double> target = marginal_utility(profiles[i], yc);
            for (size_t k = 0; k < b.size(); ++k) {
                out[i][k] = target[k] - b[k];
                worst = std::max(worst,
                                 std::abs(out[i][k]) / std::max(b[k], 1e-12));
            }
        } else {
            std::vector<double> d = demand(profiles[i], b);
            for (size_t k = 0; k < b.size(); ++k) {
                out[i][k] = d[k] - y[k];
                worst = std::max(worst,
                                 std::abs(out[i][k]) / std::max(d[k], 1e-12));
            }
        }
    }
    return worst;
}

SchemeList schemes_of(const std::vector<AdvertiserProfile>& profiles) {
    SchemeList out;
    bool any = false;
    for (const auto& p : profiles)
        if (p.categories) any = true;
    if (!any) return out;
    out.reserve(profiles.size());
    for (const auto& p : profiles) out.push_back(p.categories);
    return out;
}

DualValue dual_objective(const TypeDistribution& dist,
                         const std::vector<AdvertiserProfile>& profiles,
                         const BidProfile& bids, std::int64_t n,
                         std::uint64_t seed, std::uint64_t stream_offset) {
    dist.validate();
    bids.validate();
    check_positive_bids(bids);
    check_profiles(profiles, bids);
    if (n < 1) throw std::invalid_argument("need at least one sample");
    SchemeList schemes = schemes_of(profiles);
    DualValue rev = revenue_term(
        [&](std::int64_t idx) {
            return sample_click_matrix(
                dist, seed, stream_offset + static_cast<std::uint64_t>(idx));
        },
        n, bids, schemes);
    rev.value += surplus_total(profiles, bids);
    return rev;
}

DualValue dual_on_pool(const InstancePool& pool,
                       const std::vector<AdvertiserProfile>& profiles,
                       const BidProfile& bids) {
    bids.validate();
    check_positive_bids(bids);
    check_profiles(profiles, bids);
    if (pool.instances.empty())
        throw std::invalid_argument("empty instance pool");
    SchemeList schemes = schemes_of(profiles);
    DualValue rev = revenue_term(
        [&](std::int64_t idx) { return pool.instances[static_cast<size_t>(idx)]; },
        static_cast<std::int64_t>(pool.instances.size()), bids, schemes);
    rev.value += surplus_total(profiles, bids);
    return rev;
}

EquilibriumReport solve_equilibrium(const TypeDistribution& dist,
                                    const std::vector<AdvertiserProfile>& profiles,
                                    const BidProfile& init_bids,
                                    const EquilibriumConfig& config,
                                    std::uint64_t seed) {
    dist.validate();
    init_bids.validate();
    check_positive_bids(init_bids);
    check_profiles(profiles, init_bids);
    if (config.pool_size < 2) throw std::invalid_argument("pool too small");

    SchemeList schemes = schemes_of(profiles);
    InstancePool pool =
        sample_pool(dist, config.pool_size, seed, config.stream_offset);

    EquilibriumReport report;
    BidProfile b = init_bids;
    double best_res = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> resid;
    for (int sweep = 0; sweep < config.max_sweeps; ++sweep) {
        CtrEstimate est = ctr_on_pool(pool, b, schemes);
        double v = dual_value_at(profiles, b, est.y_hat);
        double worst = residual_map(profiles, b, est.y_hat, config.y_floor, resid);
        report.v_trace.push_back(v);
        report.residual_trace.push_back(worst);
        report.iterations = sweep + 1;
        if (worst < best_res) {
            best_res = worst;
            report.bids = b;
            report.ctr = est;
            report.dual_value = v;
            report.residuals = resid;
        }
        if (worst <= config.residual_tol) {
            report.converged = true;
            break;
        }
        double step = std::max(config.step_min,
                               config.step0 /
                                   (1.0 + sweep / config.step_decay_sweeps));
        for (size_t i = 0; i < profiles.size(); ++i) {
            std::vector<double> yc = est.y_hat[i];
            for (double& x : yc) x = std::max(x, config.y_floor);
            std::vector<double> target = marginal_utility(profiles[i], yc);
            for (size_t k = 0; k < b.per_category[i].size(); ++k) {
                double cur = b.per_category[i][k];
                double next = cur + step * (target[k] - cur);
                b.per_category[i][k] = std::clamp(next, 0.5 * cur, 2.0 * cur);
            }
        }
    }
    report.max_residual = best_res;
    return report;
}

double welfare(const std::vector<AdvertiserProfile>& profiles,
               const std::vector<std::vector<double>>& rates) {
    if (profiles.size() != rates.size())
        throw std::invalid_argument("rates do not match advertiser count");
    double w = 0.0;
    for (size_t i = 0; i < profiles.size(); ++i)
        w += utility_value(profiles[i], rates[i]);
    return w;
}

namespace {

// Flattened rate vectors for the conditional-gradient oracle.
struct OracleDims {
    std::vector<int> offset;
    int total = 0;
};

struct OracleContext {
    const std::vector<MixtureAtom>* support;
    const std::vector<AdvertiserProfile>* profiles;
    OracleDims dims;
    std::vector<std::vector<int>> atom_category;  // per advertiser, per atom
};

// One vertex of the rate region: per atom, assign with the given flat values
// as bids. Returns the flattened rates and a signature of the matchings.
void oracle_vertex(const OracleContext& ctx, const std::vector<double>& value,
                   std::vector<double>& y, std::vector<int>& signature) {
    const auto& support = *ctx.support;
    const int I = static_cast<int>(ctx.profiles->size());
    y.assign(static_cast<size_t>(ctx.dims.total), 0.0);
    signature.clear();
    std::vector<double> flat(static_cast<size_t>(I));
    for (size_t a = 0; a < support.size(); ++a) {
        for (int i = 0; i < I; ++i) {
            int k = ctx.atom_category[static_cast<size_t>(i)][a];
            flat[static_cast<size_t>(i)] =
                value[static_cast<size_t>(ctx.dims.offset[i] + k)];
        }
        Matching m = solve_assignment(support[a].matrix, flat);
        for (int i = 0; i < I; ++i) {
            signature.push_back(m.slot_of[static_cast<size_t>(i)]);
            int k = ctx.atom_category[static_cast<size_t>(i)][a];
            y[static_cast<size_t>(ctx.dims.offset[i] + k)] +=
                support[a].weight * m.ctr[static_cast<size_t>(i)];
        }
    }
}

std::vector<std::vector<double>> unflatten(const OracleDims& dims,
                                           const std::vector<double>& y, int I) {
    std::vector<std::vector<double>> out(static_cast<size_t>(I));
    for (int i = 0; i < I; ++i)
        out[static_cast<size_t>(i)].assign(y.begin() + dims.offset[i],
                                           y.begin() + dims.offset[i + 1]);
    return out;
}

std::vector<double> flat_gradient(const OracleContext& ctx,
                                  const std::vector<double>& y) {
    const int I = static_cast<int>(ctx.profiles->size());
    std::vector<double> g(static_cast<size_t>(ctx.dims.total));
    for (int i = 0; i < I; ++i) {
        std::vector<double> yi(y.begin() + ctx.dims.offset[i],
                               y.begin() + ctx.dims.offset[i + 1]);
        std::vector<double> gi = marginal_utility((*ctx.profiles)[static_cast<size_t>(i)], yi);
        std::copy(gi.begin(), gi.end(), g.begin() + ctx.dims.offset[i]);
    }
    return g;
}

double flat_welfare(const OracleContext& ctx, const std::vector<double>& y) {
    const int I = static_cast<int>(ctx.profiles->size());
    double w = 0.0;
    for (int i = 0; i < I; ++i) {
        std::vector<double> yi(y.begin() + ctx.dims.offset[i],
                               y.begin() + ctx.dims.offset[i + 1]);
        w += utility_value((*ctx.profiles)[static_cast<size_t>(i)], yi);
    }
    return w;
}

} // namespace

SystemSolution system_oracle(const std::vector<MixtureAtom>& support,
                             const std::vector<AdvertiserProfile>& profiles,
                             double gap_tol, long max_iters) {
    if (support.empty()) throw std::invalid_argument("empty type support");
    double total = 0.0;
    for (const auto& a : support) {
        if (!(a.weight > 0.0))
            throw std::invalid_argument("atom weights must be positive");
        total += a.weight;
        a.matrix.validate();
        if (a.matrix.n_ads != static_cast<int>(profiles.size()))
            throw std::invalid_argument("atom advertiser count mismatch");
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument("atom weights must sum to 1");

    OracleContext ctx;
    ctx.support = &support;
    ctx.profiles = &profiles;
    const int I = static_cast<int>(profiles.size());
    ctx.dims.offset.assign(static_cast<size_t>(I + 1), 0);
    ctx.atom_category.assign(static_cast<size_t>(I), {});
    for (int i = 0; i < I; ++i) {
        profiles[static_cast<size_t>(i)].validate();
        int K = profiles[static_cast<size_t>(i)].n_categories();
        ctx.dims.offset[static_cast<size_t>(i + 1)] = ctx.dims.offset[static_cast<size_t>(i)] + K;
        auto& cats = ctx.atom_category[static_cast<size_t>(i)];
        cats.assign(support.size(), 0);
        if (K > 1) {
            const CategoryScheme& sc = *profiles[static_cast<size_t>(i)].categories;
            if (sc.category_of_atom.size() < support.size())
                throw std::invalid_argument("category map misses atoms");
            for (size_t a = 0; a < support.size(); ++a)
                cats[a] = sc.category_of_atom[a];
        }
    }
    ctx.dims.total = ctx.dims.offset[static_cast<size_t>(I)];

    // Start from the average of the solo vertices so every rate is positive.
    std::vector<std::vector<double>> vertex_y;
    std::vector<double> lambda;
    std::map<std::vector<int>, size_t> index_of;
    std::vector<double> y(static_cast<size_t>(ctx.dims.total), 0.0);
    {
        std::vector<double> value(static_cast<size_t>(ctx.dims.total), 0.0);
        std::vector<double> vy;
        std::vector<int> sig;
        for (int i = 0; i < I; ++i) {
            std::fill(value.begin(), value.end(), 0.0);
            for (int d = ctx.dims.offset[static_cast<size_t>(i)];
                 d < ctx.dims.offset[static_cast<size_t>(i + 1)]; ++d)
                value[static_cast<size_t>(d)] = 1.0;
            oracle_vertex(ctx, value, vy, sig);
            auto [it, fresh] = index_of.try_emplace(sig, vertex_y.size());
            if (fresh) {
                vertex_y.push_back(vy);
                lambda.push_back(0.0);
            }
            lambda[it->second] += 1.0 / I;
        }
        for (size_t s = 0; s < vertex_y.size(); ++s)
            for (int d = 0; d < ctx.dims.total; ++d)
                y[static_cast<size_t>(d)] += lambda[s] * vertex_y[s][static_cast<size_t>(d)];
        for (int i = 0; i < I; ++i)
            for (int d = ctx.dims.offset[static_cast<size_t>(i)];
                 d < ctx.dims.offset[static_cast<size_t>(i + 1)]; ++d)
                if (!(y[static_cast<size_t>(d)] > 0.0))
                    throw std::invalid_argument(
                        "an advertiser category earns no clicks on this support");
    }

    SystemSolution sol;
    std::vector<double> vy;
    std::vector<int> sig;
    const double theta_edge = 1e-12;
    for (long it = 0; it < max_iters; ++it) {
        std::vector<double> grad = flat_gradient(ctx, y);
        oracle_vertex(ctx, grad, vy, sig);
        double w_now = flat_welfare(ctx, y);
        double gap = 0.0;
        for (int d = 0; d < ctx.dims.total; ++d)
            gap += grad[static_cast<size_t>(d)] *
                   (vy[static_cast<size_t>(d)] - y[static_cast<size_t>(d)]);
        sol.iterations = it + 1;
        sol.gap = gap;
        sol.welfare = w_now;
        if (gap <= gap_tol * std::max(1.0, std::abs(w_now))) break;

        auto [fw_it, fresh] = index_of.try_emplace(sig, vertex_y.size());
        if (fresh) {
            vertex_y.push_back(vy);
            lambda.push_back(0.0);
        }
        size_t fw = fw_it->second;
        // Pairwise direction: move mass from the worst active vertex.
        size_t away = fw;
        double worst = std::numeric_limits<double>::infinity();
        for (size_t s = 0; s < vertex_y.size(); ++s) {
            if (lambda[s] <= 0.0) continue;
            double val = 0.0;
            for (int d = 0; d < ctx.dims.total; ++d)
                val += grad[static_cast<size_t>(d)] * vertex_y[s][static_cast<size_t>(d)];
            if (val < worst) {
                worst = val;
                away = s;
            }
        }
        if (away == fw) break;  // single-vertex support: y is that vertex
        double cap = lambda[away];
        std::vector<double> dir(static_cast<size_t>(ctx.dims.total));
        for (int d = 0; d < ctx.dims.total; ++d)
            dir[static_cast<size_t>(d)] = vertex_y[fw][static_cast<size_t>(d)] -
                                          vertex_y[away][static_cast<size_t>(d)];
        auto slope = [&](double theta) {
            std::vector<double> probe(static_cast<size_t>(ctx.dims.total));
            for (int d = 0; d < ctx.dims.total; ++d)
                probe[static_cast<size_t>(d)] = std::max(
                    1e-300,
                    y[static_cast<size_t>(d)] + theta * dir[static_cast<size_t>(d)]);
            std::vector<double> g = flat_gradient(ctx, probe);
            double s = 0.0;
            for (int d = 0; d < ctx.dims.total; ++d)
                s += g[static_cast<size_t>(d)] * dir[static_cast<size_t>(d)];
            return s;
        };
        double theta = cap;
        if (slope(cap * (1.0 - theta_edge)) < 0.0) {
            double lo = 0.0, hi = cap * (1.0 - theta_edge);
            for (int bs = 0; bs < 80; ++bs) {
                double mid = 0.5 * (lo + hi);
                if (slope(mid) > 0.0)
                    lo = mid;
                else
                    hi = mid;
            }
            theta = 0.5 * (lo + hi);
        }
        if (theta <= 0.0) break;
        lambda[away] -= theta;
        lambda[fw] += theta;
        for (int d = 0; d < ctx.dims.total; ++d)
            y[static_cast<size_t>(d)] += theta * dir[static_cast<size_t>(d)];
        if (lambda[away] < 1e-15 && lambda[away] > 0.0) {
            for (int d = 0; d < ctx.dims.total; ++d)
                y[static_cast<size_t>(d)] +=
                    lambda[away] * dir[static_cast<size_t>(d)];
            lambda[fw] += lambda[away];
            lambda[away] = 0.0;
        }
        if ((it & 63) == 63) {
            // Kill accumulated drift: rebuild y from the active vertices.
            std::fill(y.begin(), y.end(), 0.0);
            for (size_t s = 0; s < vertex_y.size(); ++s) {
                if (lambda[s] <= 0.0) continue;
                for (int d = 0; d < ctx.dims.total; ++d)
                    y[static_cast<size_t>(d)] +=
                        lambda[s] * vertex_y[s][static_cast<size_t>(d)];
            }
        }
    }
    sol.y_star = unflatten(ctx.dims, y, I);
    return sol;
}

} // namespace adsim
