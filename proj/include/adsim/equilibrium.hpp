#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "adsim/advertisers.hpp"
#include "adsim/search_model.hpp"

namespace adsim {

// Category schemes as the estimator expects them, one slot per advertiser.
SchemeList schemes_of(const std::vector<AdvertiserProfile>& profiles);

struct DualValue {
    double value = 0.0;
    double std_err = 0.0;
};

// V(b) = sum of conjugate surpluses plus bid-weighted rates, the quantity the
// bid dynamics descend. Estimated over n instances keyed by (seed, offset).
DualValue dual_objective(const TypeDistribution& dist,
                         const std::vector<AdvertiserProfile>& profiles,
                         const BidProfile& bids, std::int64_t n,
                         std::uint64_t seed, std::uint64_t stream_offset = 0);

// Same value over a frozen pool (the solver's common-random-number stream).
DualValue dual_on_pool(const InstancePool& pool,
                       const std::vector<AdvertiserProfile>& profiles,
                       const BidProfile& bids);

// V(b) given already-averaged rates: conjugate surpluses plus spend.
double dual_value_at(const std::vector<AdvertiserProfile>& profiles,
                     const BidProfile& bids,
                     const std::vector<std::vector<double>>& y_hat);

// Signed demand-minus-rate residuals; weighted-sum profiles, whose demand is
// set-valued, are measured in bid space instead. Returns the worst relative
// magnitude. Rates are clamped at y_floor before marginals are inverted.
double residual_map(const std::vector<AdvertiserProfile>& profiles,
                    const BidProfile& bids,
                    const std::vector<std::vector<double>>& y_hat,
                    double y_floor, std::vector<std::vector<double>>& out);

struct EquilibriumConfig {
    double residual_tol = 1e-3;   // relative demand units
    int max_sweeps = 400;
    double step0 = 0.5;           // initial damping
    double step_decay_sweeps = 50.0;  // damping halves after this many sweeps
    double step_min = 0.05;
    std::int64_t pool_size = 20000;
    std::uint64_t stream_offset = 0;
    double y_floor = 1e-9;        // rate clamp before inverting marginals
};

struct EquilibriumReport {
    BidProfile bids;
    CtrEstimate ctr;
    double dual_value = 0.0;
    std::vector<std::vector<double>> residuals;  // demand minus rate, signed
    double max_residual = 0.0;                   // relative
    std::optional<double> duality_gap;
    int iterations = 0;
    bool converged = false;
    std::vector<double> v_trace;         // per sweep, on the frozen pool
    std::vector<double> residual_trace;  // per sweep, max relative
};

// Damped fixed-point iteration b <- b + step (U'(rate(b)) - b) against one
// frozen instance pool; each advertiser sees only its own averaged rates.
EquilibriumReport solve_equilibrium(const TypeDistribution& dist,
                                    const std::vector<AdvertiserProfile>& profiles,
                                    const BidProfile& init_bids,
                                    const EquilibriumConfig& config,
                                    std::uint64_t seed);

struct SystemSolution {
    std::vector<std::vector<double>> y_star;  // per advertiser, per category
    double welfare = 0.0;
    double gap = 0.0;       // conditional-gradient certificate at exit
    long iterations = 0;
};

// Welfare maximizer over the exact feasible rate region of a finite type
// support, by conditional gradient: each linear subproblem is one assignment
// solve per atom with bids set to the current marginal utilities.
SystemSolution system_oracle(const std::vector<MixtureAtom>& support,
                             const std::vector<AdvertiserProfile>& profiles,
                             double gap_tol = 1e-5, long max_iters = 500000);

// Total utility at the given rates.
double welfare(const std::vector<AdvertiserProfile>& profiles,
               const std::vector<std::vector<double>>& rates);

} // namespace adsim
