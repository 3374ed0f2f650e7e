#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "adsim/advertisers.hpp"
#include "adsim/instance.hpp"

namespace adsim {

enum class DistKind {
    ordered_polytope_uniform,
    product_form,
    single_slot_independent,
    finite_mixture
};

// Per-advertiser quality effect for the product-form family.
struct AdEffect {
    bool is_constant = true;
    double value = 1.0;  // constant case
    double lo = 0.0, hi = 1.0;  // uniform case
};

// With probability epsilon_no_reserve the search carries no reserve; otherwise
// every advert-slot pair carries benefit -reserve_R.
struct ReservePolicy {
    double reserve_R = 0.0;
    double epsilon_no_reserve = 1.0;
};

struct MixtureAtom {
    double weight = 1.0;
    ClickMatrix matrix;
};

struct TypeDistribution {
    DistKind kind = DistKind::ordered_polytope_uniform;
    int n_ads = 0;
    int n_slots = 0;                 // fixed-L kinds
    double scale = 1.0;              // ordered polytope box edge
    std::vector<double> slot_effects;                 // product_form, decreasing
    std::vector<AdEffect> ad_effects;                 // product_form
    std::vector<std::pair<double, double>> ranges;    // single_slot_independent
    std::vector<MixtureAtom> atoms;                   // finite_mixture
    std::optional<ReservePolicy> reserve;

    void validate() const;
    int max_slots() const;
};

// Estimated click-through rates, one entry per advertiser and category.
struct CtrEstimate {
    std::vector<std::vector<double>> y_hat;
    std::vector<std::vector<double>> std_err;
    std::int64_t n_samples = 0;
    std::uint64_t seed = 0;

    std::vector<double> flat_y() const;
    std::vector<double> flat_se() const;
};

using SchemeList = std::vector<std::optional<CategoryScheme>>;

// One realized search. The matrix stream is keyed by (seed, index); reserve
// draws use a separate stream so toggling the policy never perturbs the
// matrix randomness.
ClickMatrix sample_click_matrix(const TypeDistribution& dist,
                                std::uint64_t seed, std::uint64_t index);

// Monte Carlo mean of the assignment click-through rates over n instances
// keyed (seed, stream_offset + 0..n-1). Equal seeds share instances across
// different bid vectors.
CtrEstimate estimate_ctr(const TypeDistribution& dist, const BidProfile& bids,
                         std::int64_t n, std::uint64_t seed,
                         std::uint64_t stream_offset = 0,
                         const SchemeList& schemes = {});

// Exact expectation for finite mixtures (atom and reserve branches enumerated).
std::vector<std::vector<double>> exact_ctr(const TypeDistribution& dist,
                                           const BidProfile& bids,
                                           const SchemeList& schemes = {});

// Frozen instance set for bid iterations against common random numbers.
struct InstancePool {
    std::vector<ClickMatrix> instances;
    std::uint64_t seed = 0;
    std::uint64_t stream_offset = 0;
};

InstancePool sample_pool(const TypeDistribution& dist, std::int64_t n,
                         std::uint64_t seed, std::uint64_t stream_offset = 0);

CtrEstimate ctr_on_pool(const InstancePool& pool, const BidProfile& bids,
                        const SchemeList& schemes = {});

// Advertiser i's averaged rate curve over a bid grid, common random numbers
// across grid points.
struct ProbeCurve {
    std::vector<double> grid;
    std::vector<double> y_hat;
    std::vector<double> std_err;
    bool strictly_increasing = false;
    int flat_segments = 0;  // adjacent grid pairs with no increase
};

ProbeCurve monotonicity_probe(const TypeDistribution& dist,
                              const BidProfile& base_bids, int advertiser,
                              const std::vector<double>& grid, std::int64_t n,
                              std::uint64_t seed);

} // namespace adsim
