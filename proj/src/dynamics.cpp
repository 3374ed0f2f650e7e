#include "adsim/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace adsim {

double DynamicsConfig::kappa_of(int advertiser) const {
    if (step_size.size() == 1) return step_size[0];
    return step_size[static_cast<size_t>(advertiser)];
}

void DynamicsConfig::validate(int n_ads) const {
    if (step_size.size() != 1 && step_size.size() != static_cast<size_t>(n_ads))
        throw std::invalid_argument("step sizes do not match advertiser count");
    for (double k : step_size)
        if (!(k > 0.0)) throw std::invalid_argument("step sizes must be positive");
    if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
    if (noise_mode != NoiseMode::exact && feedback_window < 1)
        throw std::invalid_argument("feedback window must be at least 1");
    if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
}

namespace {

// The shared update core; scale multiplies every step size (the exact-mode
// backtracking knob).
BidProfile apply_step(const BidProfile& bids,
                      const std::vector<std::vector<double>>& feedback,
                      const std::vector<AdvertiserProfile>& profiles,
                      const DynamicsConfig& cfg, double scale) {
    const int I = bids.n_ads();
    if (static_cast<int>(profiles.size()) != I)
        throw std::invalid_argument("profiles do not match advertiser count");
    if (static_cast<int>(feedback.size()) != I)
        throw std::invalid_argument("feedback does not match advertiser count");
    cfg.validate(I);
    BidProfile next = bids;
    for (int i = 0; i < I; ++i) {
        const auto& b = bids.per_category[static_cast<size_t>(i)];
        const auto& y = feedback[static_cast<size_t>(i)];
        profiles[static_cast<size_t>(i)].validate();
        if (static_cast<int>(b.size()) != profiles[static_cast<size_t>(i)].n_categories() ||
            b.size() != y.size())
            throw std::invalid_argument("bid/feedback dimensions do not match the category scheme");
        for (double v : b)
            if (!(v > 0.0))
                throw std::invalid_argument("bids must be strictly positive");
        std::vector<double> yc = y;
        for (double& v : yc) {
            if (!(v >= 0.0) || !std::isfinite(v))
                throw std::invalid_argument("feedback rates must be finite and nonnegative");
            v = std::max(v, cfg.y_floor);
        }
        std::vector<double> target = marginal_utility(profiles[static_cast<size_t>(i)], yc);
        double kappa = scale * cfg.kappa_of(i);
        for (size_t k = 0; k < b.size(); ++k) {
            double gap = target[k] - b[k];
            double db;
            if (cfg.update_rule == UpdateRule::proportional)
                db = kappa * gap;
            else
                db = gap > 0.0 ? kappa : (gap < 0.0 ? -kappa : 0.0);
            next.per_category[static_cast<size_t>(i)][k] =
                std::max(b[k] + db, 0.5 * b[k]);
        }
    }
    return next;
}

} // namespace

BidProfile step_categories(const BidProfile& bids,
                           const std::vector<std::vector<double>>& feedback,
                           const std::vector<AdvertiserProfile>& profiles,
                           const DynamicsConfig& cfg) {
    return apply_step(bids, feedback, profiles, cfg, 1.0);
}

std::vector<double> step(const std::vector<double>& bids,
                         const std::vector<double>& ctr_feedback,
                         const std::vector<AdvertiserProfile>& profiles,
                         const DynamicsConfig& cfg) {
    if (bids.size() != ctr_feedback.size())
        throw std::invalid_argument("bid/feedback dimensions do not match");
    std::vector<std::vector<double>> fb(ctr_feedback.size());
    for (size_t i = 0; i < ctr_feedback.size(); ++i) fb[i] = {ctr_feedback[i]};
    return step_categories(BidProfile::flat(bids), fb, profiles, cfg).flat_bids();
}

Trajectory run_trajectory(const TypeDistribution& dist,
                          const std::vector<AdvertiserProfile>& profiles,
                          const BidProfile& init_bids,
                          const DynamicsConfig& cfg, std::uint64_t seed) {
    dist.validate();
    init_bids.validate();
    cfg.validate(init_bids.n_ads());
    SchemeList schemes = schemes_of(profiles);

    InstancePool pool;
    if (cfg.noise_mode == NoiseMode::frozen_pool_crn)
        pool = sample_pool(dist, cfg.feedback_window, seed, cfg.stream_offset);

    auto rates_at = [&](const BidProfile& b, int epoch) {
        switch (cfg.noise_mode) {
            case NoiseMode::frozen_pool_crn:
                return ctr_on_pool(pool, b, schemes).y_hat;
            case NoiseMode::fresh_samples: {
                std::uint64_t off =
                    cfg.stream_offset +
                    static_cast<std::uint64_t>(epoch) *
                        static_cast<std::uint64_t>(cfg.feedback_window);
                return estimate_ctr(dist, b, cfg.feedback_window, seed, off, schemes)
                    .y_hat;
            }
            case NoiseMode::exact:
            default:
                return exact_ctr(dist, b, schemes);
        }
    };

    Trajectory traj;
    BidProfile b = init_bids;
    std::vector<std::vector<double>> resid;
    double backtrack = 1.0;
    std::vector<std::vector<double>> y = rates_at(b, 0);
    for (int epoch = 0;; ++epoch) {
        double v = dual_value_at(profiles, b, y);
        double worst = residual_map(profiles, b, y, cfg.y_floor, resid);
        traj.times.push_back(epoch);
        traj.bids.push_back(b);
        traj.v_path.push_back(v);
        traj.rates.push_back(y);
        traj.residuals.push_back(resid);
        traj.max_residual.push_back(worst);
        traj.terminal_residual = worst;
        traj.within_tol = worst <= cfg.tol;
        if (epoch == cfg.horizon) break;
        if (cfg.noise_mode == NoiseMode::exact) {
            if (traj.within_tol) break;
            // Backtracking keeps the objective strictly decreasing; a stall
            // below machine step size is reported as non-convergence.
            backtrack = std::min(1.0, backtrack * 2.0);
            bool moved = false;
            while (backtrack > 1e-14) {
                BidProfile trial = apply_step(b, y, profiles, cfg, backtrack);
                std::vector<std::vector<double>> ty = rates_at(trial, epoch + 1);
                double tv = dual_value_at(profiles, trial, ty);
                if (tv < v) {
                    b = std::move(trial);
                    y = std::move(ty);
                    moved = true;
                    break;
                }
                backtrack *= 0.5;
            }
            if (!moved) break;
        } else {
            b = apply_step(b, y, profiles, cfg, 1.0);
            y = rates_at(b, epoch + 1);
        }
    }
    return traj;
}

} // namespace adsim
