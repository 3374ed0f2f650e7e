#include "adsim/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "adsim/matching.hpp"
#include "adsim/pricing.hpp"
#include "adsim/rng.hpp"

namespace adsim {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kVersion = "0.1.0";

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

fs::path prepare_dir(const std::string& out_dir) {
    fs::path dir(out_dir.empty() ? "." : out_dir);
    fs::create_directories(dir);
    return dir;
}

std::string hash_hex(const Scenario& s) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(scenario_hash(s)));
    return buf;
}

// Per-instance flat bid vector: each advertiser bids its category's level.
std::vector<double> effective_flat(const ClickMatrix& cm, const BidProfile& bids,
                                   const SchemeList& schemes) {
    std::vector<double> flat(static_cast<size_t>(bids.n_ads()));
    for (size_t i = 0; i < flat.size(); ++i) {
        int k = 0;
        if (!schemes.empty() && schemes[i] && schemes[i]->n_categories > 1) {
            if (cm.atom < 0 ||
                cm.atom >= static_cast<int>(schemes[i]->category_of_atom.size()))
                throw std::invalid_argument("instance atom outside the category map");
            k = schemes[i]->category_of_atom[static_cast<size_t>(cm.atom)];
        }
        flat[i] = bids.per_category[i][static_cast<size_t>(k)];
    }
    return flat;
}

struct Stopwatch {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    }
};

void write_runrecord(const fs::path& dir, const char* command, const Scenario& s,
                     const std::vector<std::string>& outputs, double wall_seconds) {
    json j;
    j["command"] = command;
    j["scenario"] = s.name;
    j["scenario_hash"] = hash_hex(s);
    j["seed"] = s.seed;
    j["outputs"] = outputs;
    j["wall_clock_seconds"] = wall_seconds;
    j["version"] = kVersion;
    write_file(dir / "runrecord.json", j.dump(2) + "\n");
}

void require_benefit_free(const Scenario& s, const char* what) {
    if (s.distribution.reserve &&
        s.distribution.reserve->epsilon_no_reserve < 1.0)
        throw std::invalid_argument(std::string(what) +
                                    " needs benefit-free instances; drop the reserve");
    for (const MixtureAtom& a : s.distribution.atoms)
        if (a.matrix.has_benefits())
            throw std::invalid_argument(std::string(what) +
                                        " needs benefit-free instances");
}

} // namespace

AuctionSummary cmd_auction_run(const Scenario& s, std::int64_t n_searches,
                               const std::string& out_dir) {
    Stopwatch watch;
    s.validate();
    if (n_searches < 0) throw std::invalid_argument("negative search count");
    if (s.mechanism.pricing == ChargeScheme::leonard)
        require_benefit_free(s, "dual pricing");
    fs::path dir = prepare_dir(out_dir);
    SchemeList schemes = schemes_of(s.profiles);
    const int I = static_cast<int>(s.profiles.size());

    AuctionSummary sum;
    sum.n_searches = n_searches;
    sum.impressions.assign(static_cast<size_t>(I), 0);
    sum.clicks.assign(static_cast<size_t>(I), 0);
    sum.ctr_estimate.assign(static_cast<size_t>(I), 0.0);
    sum.spend.assign(static_cast<size_t>(I), 0.0);
    sum.avg_charge.assign(static_cast<size_t>(I), 0.0);

    std::string impressions = "search,advertiser,slot,bid,click_prob\n";
    std::string clicks = "search,advertiser,slot\n";
    std::string charges = "search,advertiser,slot,bid,charge,scheme\n";
    const char* scheme_name =
        s.mechanism.pricing == ChargeScheme::randomized    ? "randomized"
        : s.mechanism.pricing == ChargeScheme::vcg_rebate ? "vcg_rebate"
                                                          : "leonard";

    for (std::int64_t t = 0; t < n_searches; ++t) {
        ClickMatrix cm =
            sample_click_matrix(s.distribution, s.seed, static_cast<std::uint64_t>(t));
        std::vector<double> flat = effective_flat(cm, s.init_bids, schemes);
        Matching m = solve_assignment(cm, flat);
        Philox click_rng = make_rng(s.seed, StreamKind::click, static_cast<std::uint64_t>(t));
        Philox price_rng = make_rng(s.seed, StreamKind::price, static_cast<std::uint64_t>(t));
        for (int i = 0; i < I; ++i) {
            int l = m.slot_of[static_cast<size_t>(i)];
            if (l < 0) continue;
            double p = cm.p(i, l);
            sum.impressions[static_cast<size_t>(i)] += 1;
            sum.ctr_estimate[static_cast<size_t>(i)] += p;
            impressions += std::to_string(t) + ',' + std::to_string(i) + ',' +
                           std::to_string(l) + ',' + fmt(flat[static_cast<size_t>(i)]) +
                           ',' + fmt(p) + '\n';
            if (click_rng.uniform01() >= p) continue;
            sum.clicks[static_cast<size_t>(i)] += 1;
            clicks += std::to_string(t) + ',' + std::to_string(i) + ',' +
                      std::to_string(l) + '\n';
            ClickEvent ev;
            ev.instance = cm;
            ev.bids = BidProfile::flat(flat);
            ev.advertiser = i;
            ev.slot = l;
            double charge = 0.0;
            switch (s.mechanism.pricing) {
                case ChargeScheme::randomized:
                    charge = randomized_charge(ev, price_rng).charge;
                    break;
                case ChargeScheme::vcg_rebate:
                    charge = vcg_rebate_charge(ev).charge;
                    break;
                case ChargeScheme::leonard:
                    charge = leonard_prices(cm, flat).per_click[static_cast<size_t>(i)];
                    break;
            }
            sum.spend[static_cast<size_t>(i)] += charge;
            charges += std::to_string(t) + ',' + std::to_string(i) + ',' +
                       std::to_string(l) + ',' + fmt(flat[static_cast<size_t>(i)]) +
                       ',' + fmt(charge) + ',' + scheme_name + '\n';
        }
    }
    for (int i = 0; i < I; ++i) {
        if (n_searches > 0)
            sum.ctr_estimate[static_cast<size_t>(i)] /= static_cast<double>(n_searches);
        if (sum.clicks[static_cast<size_t>(i)] > 0)
            sum.avg_charge[static_cast<size_t>(i)] =
                sum.spend[static_cast<size_t>(i)] /
                static_cast<double>(sum.clicks[static_cast<size_t>(i)]);
    }

    json j;
    j["n_searches"] = sum.n_searches;
    j["pricing"] = scheme_name;
    json per = json::array();
    for (int i = 0; i < I; ++i) {
        json aj;
        aj["advertiser"] = i;
        aj["impressions"] = sum.impressions[static_cast<size_t>(i)];
        aj["clicks"] = sum.clicks[static_cast<size_t>(i)];
        aj["ctr_estimate"] = sum.ctr_estimate[static_cast<size_t>(i)];
        aj["spend"] = sum.spend[static_cast<size_t>(i)];
        aj["avg_charge_per_click"] = sum.avg_charge[static_cast<size_t>(i)];
        per.push_back(std::move(aj));
    }
    j["advertisers"] = std::move(per);

    write_file(dir / "impressions.csv", impressions);
    write_file(dir / "clicks.csv", clicks);
    write_file(dir / "charges.csv", charges);
    write_file(dir / "summary.json", j.dump(2) + "\n");
    write_runrecord(dir, "run", s,
                    {"impressions.csv", "clicks.csv", "charges.csv", "summary.json"},
                    watch.seconds());
    return sum;
}

EquilibriumReport cmd_equilibrium(const Scenario& s, const std::string& out_dir) {
    Stopwatch watch;
    s.validate();
    fs::path dir = prepare_dir(out_dir);
    EquilibriumReport rep = solve_equilibrium(s.distribution, s.profiles, s.init_bids,
                                              s.equilibrium, s.seed);
    json j;
    j["converged"] = rep.converged;
    j["iterations"] = rep.iterations;
    j["max_residual"] = rep.max_residual;
    j["dual_value"] = rep.dual_value;
    if (rep.duality_gap)
        j["duality_gap"] = *rep.duality_gap;
    else
        j["duality_gap"] = nullptr;
    j["bids"] = rep.bids.per_category;
    j["ctr"] = rep.ctr.y_hat;
    j["ctr_std_err"] = rep.ctr.std_err;
    j["residuals"] = rep.residuals;
    j["v_trace"] = rep.v_trace;
    j["residual_trace"] = rep.residual_trace;
    write_file(dir / "equilibrium.json", j.dump(2) + "\n");
    write_runrecord(dir, "equilibrium", s, {"equilibrium.json"}, watch.seconds());
    return rep;
}

Trajectory cmd_dynamics(const Scenario& s, const std::string& out_dir) {
    Stopwatch watch;
    s.validate();
    fs::path dir = prepare_dir(out_dir);
    Trajectory traj =
        run_trajectory(s.distribution, s.profiles, s.init_bids, s.dynamics, s.seed);
    std::string csv = "epoch,advertiser,category,bid,ctr,residual,v\n";
    for (size_t t = 0; t < traj.times.size(); ++t) {
        for (size_t i = 0; i < traj.bids[t].per_category.size(); ++i) {
            for (size_t k = 0; k < traj.bids[t].per_category[i].size(); ++k) {
                csv += std::to_string(traj.times[t]) + ',' + std::to_string(i) + ',' +
                       std::to_string(k) + ',' + fmt(traj.bids[t].per_category[i][k]) +
                       ',' + fmt(traj.rates[t][i][k]) + ',' +
                       fmt(traj.residuals[t][i][k]) + ',' + fmt(traj.v_path[t]) + '\n';
            }
        }
    }
    write_file(dir / "trajectory.csv", csv);
    write_runrecord(dir, "dynamics", s, {"trajectory.csv"}, watch.seconds());
    return traj;
}

double cmd_price_audit(const Scenario& s, std::int64_t n_events,
                       const std::string& out_dir) {
    Stopwatch watch;
    s.validate();
    if (n_events < 1) throw std::invalid_argument("need at least one audit event");
    require_benefit_free(s, "price audit");
    fs::path dir = prepare_dir(out_dir);
    SchemeList schemes = schemes_of(s.profiles);

    std::string csv =
        "instance,advertiser,slot,bid,randomized_expected,vcg_rebate,leonard,spread\n";
    double worst = 0.0;
    std::int64_t found = 0;
    for (std::uint64_t t = 0; found < n_events; ++t) {
        if (t >= 1000 * static_cast<std::uint64_t>(n_events) + 1000)
            throw std::runtime_error("audit could not collect enough assigned clicks");
        ClickMatrix cm = sample_click_matrix(s.distribution, s.seed, t);
        std::vector<double> flat = effective_flat(cm, s.init_bids, schemes);
        Matching m = solve_assignment(cm, flat);
        LeonardPrices lp = leonard_prices(cm, flat);
        for (int i = 0; i < static_cast<int>(flat.size()) && found < n_events; ++i) {
            int l = m.slot_of[static_cast<size_t>(i)];
            if (l < 0) continue;
            ClickEvent ev;
            ev.instance = cm;
            ev.bids = BidProfile::flat(flat);
            ev.advertiser = i;
            ev.slot = l;
            double expected = expected_randomized_charge(ev).charge;
            double vcg = vcg_rebate_charge(ev).charge;
            double leo = lp.per_click[static_cast<size_t>(i)];
            double spread = std::abs(vcg - leo);
            worst = std::max(worst, spread);
            csv += std::to_string(t) + ',' + std::to_string(i) + ',' +
                   std::to_string(l) + ',' + fmt(flat[static_cast<size_t>(i)]) + ',' +
                   fmt(expected) + ',' + fmt(vcg) + ',' + fmt(leo) + ',' +
                   fmt(spread) + '\n';
            ++found;
        }
    }
    write_file(dir / "charges.csv", csv);
    write_runrecord(dir, "price-audit", s, {"charges.csv"}, watch.seconds());
    return worst;
}

SystemSolution cmd_system_oracle(const Scenario& s, const std::string& out_dir) {
    Stopwatch watch;
    s.validate();
    if (s.distribution.kind != DistKind::finite_mixture)
        throw std::invalid_argument("the rate oracle needs a finite mixture distribution");
    fs::path dir = prepare_dir(out_dir);
    SystemSolution sol = system_oracle(s.distribution.atoms, s.profiles,
                                       s.oracle.gap_tol, s.oracle.max_iters);
    json j;
    j["welfare"] = sol.welfare;
    j["gap"] = sol.gap;
    j["iterations"] = sol.iterations;
    j["y_star"] = sol.y_star;
    write_file(dir / "oracle.json", j.dump(2) + "\n");
    write_runrecord(dir, "oracle", s, {"oracle.json"}, watch.seconds());
    return sol;
}

} // namespace adsim
