#include <cstdio>
#include <cstdlib>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "adsim/harness.hpp"

namespace {

struct CommonArgs {
    std::string scenario_path;
    std::string out_dir = ".";
    std::int64_t seed = -1;
    int workers = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--scenario", args.scenario_path, "scenario file (YAML or JSON)")
        ->required();
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--seed", args.seed, "override the scenario seed");
    cmd->add_option("--workers", args.workers, "worker thread count");
}

adsim::Scenario load(const CommonArgs& args) {
    if (args.workers > 0)
        setenv("ADSIM_WORKERS", std::to_string(args.workers).c_str(), 1);
    adsim::Scenario s = adsim::load_scenario(args.scenario_path);
    if (args.seed >= 0) s.seed = static_cast<std::uint64_t>(args.seed);
    return s;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"pay-per-click auction simulator"};
    app.require_subcommand(1);

    CommonArgs run_args, eq_args, dyn_args, audit_args, oracle_args;
    std::int64_t n_searches = 10000;
    std::int64_t n_events = 200;

    CLI::App* run = app.add_subcommand("run", "simulate searches, clicks, and charges");
    add_common(run, run_args);
    run->add_option("--samples", n_searches, "number of searches");

    CLI::App* eq = app.add_subcommand("equilibrium", "solve for equilibrium bids");
    add_common(eq, eq_args);

    CLI::App* dyn = app.add_subcommand("dynamics", "run the bid adaptation loop");
    add_common(dyn, dyn_args);

    CLI::App* audit = app.add_subcommand("price-audit",
                                         "price events under all three schemes");
    add_common(audit, audit_args);
    audit->add_option("--samples", n_events, "number of audited click events");

    CLI::App* oracle = app.add_subcommand("oracle", "solve the welfare problem exactly");
    add_common(oracle, oracle_args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            adsim::AuctionSummary sum =
                adsim::cmd_auction_run(load(run_args), n_searches, run_args.out_dir);
            std::printf("simulated %lld searches\n",
                        static_cast<long long>(sum.n_searches));
            for (size_t i = 0; i < sum.impressions.size(); ++i)
                std::printf(
                    "advertiser %zu: impressions %lld clicks %lld ctr %.6f spend %.6f\n",
                    i, static_cast<long long>(sum.impressions[i]),
                    static_cast<long long>(sum.clicks[i]), sum.ctr_estimate[i],
                    sum.spend[i]);
        } else if (eq->parsed()) {
            adsim::EquilibriumReport rep =
                adsim::cmd_equilibrium(load(eq_args), eq_args.out_dir);
            std::printf("converged=%s sweeps=%d max_residual=%.3g dual=%.6f\n",
                        rep.converged ? "true" : "false", rep.iterations,
                        rep.max_residual, rep.dual_value);
        } else if (dyn->parsed()) {
            adsim::Trajectory traj =
                adsim::cmd_dynamics(load(dyn_args), dyn_args.out_dir);
            std::printf("epochs=%zu terminal_residual=%.3g within_tol=%s\n",
                        traj.times.size(), traj.terminal_residual,
                        traj.within_tol ? "true" : "false");
        } else if (audit->parsed()) {
            double worst =
                adsim::cmd_price_audit(load(audit_args), n_events, audit_args.out_dir);
            std::printf("audited %lld events, max deterministic spread %.3g\n",
                        static_cast<long long>(n_events), worst);
        } else if (oracle->parsed()) {
            adsim::SystemSolution sol =
                adsim::cmd_system_oracle(load(oracle_args), oracle_args.out_dir);
            std::printf("welfare=%.9f gap=%.3g iterations=%ld\n", sol.welfare,
                        sol.gap, sol.iterations);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
