#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "adsim/advertisers.hpp"
#include "adsim/equilibrium.hpp"
#include "adsim/search_model.hpp"

namespace adsim {

enum class NoiseMode {
    frozen_pool_crn,  // one shared pool for every epoch
    fresh_samples,    // new instances each epoch, disjoint streams
    exact,            // closed-form rates; needs an enumerable distribution
};

enum class UpdateRule { proportional, sign_rule };

struct DynamicsConfig {
    std::vector<double> step_size{0.1};  // per advertiser; one entry broadcasts
    std::int64_t feedback_window = 2000; // samples averaged per epoch
    int horizon = 500;                   // update epochs
    NoiseMode noise_mode = NoiseMode::frozen_pool_crn;
    UpdateRule update_rule = UpdateRule::proportional;
    double tol = 5e-2;       // relative residual target
    double y_floor = 1e-9;   // rate clamp before inverting marginals
    std::uint64_t stream_offset = 0;

    double kappa_of(int advertiser) const;
    void validate(int n_ads) const;
};

struct Trajectory {
    std::vector<int> times;                 // recorded epochs, 0-based
    std::vector<BidProfile> bids;           // state at each recorded epoch
    std::vector<double> v_path;             // surplus-plus-spend objective
    std::vector<std::vector<std::vector<double>>> rates;      // feedback, per epoch
    std::vector<std::vector<std::vector<double>>> residuals;  // signed, per epoch
    std::vector<double> max_residual;       // relative, per epoch
    double terminal_residual = std::numeric_limits<double>::infinity();
    bool within_tol = false;
};

// One smooth bid update from averaged click-rate feedback. Each bid moves
// toward the marginal utility at the observed rates; moves down are clipped
// at half the current bid so the path stays strictly positive.
BidProfile step_categories(const BidProfile& bids,
                           const std::vector<std::vector<double>>& feedback,
                           const std::vector<AdvertiserProfile>& profiles,
                           const DynamicsConfig& cfg);

// Flat single-category convenience wrapper.
std::vector<double> step(const std::vector<double>& bids,
                         const std::vector<double>& ctr_feedback,
                         const std::vector<AdvertiserProfile>& profiles,
                         const DynamicsConfig& cfg);

// Iterate updates against per-epoch rate feedback. Sampled modes run the
// full horizon; exact mode stops once the residual meets cfg.tol and halves
// its step whenever a trial update fails to lower the objective, so the
// objective path is strictly decreasing there. Non-convergence is reported
// in the trajectory, never thrown.
Trajectory run_trajectory(const TypeDistribution& dist,
                          const std::vector<AdvertiserProfile>& profiles,
                          const BidProfile& init_bids,
                          const DynamicsConfig& cfg, std::uint64_t seed);

} // namespace adsim
