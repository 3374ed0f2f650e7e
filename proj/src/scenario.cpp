#include "adsim/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>
#include <yaml-cpp/yaml.h>

namespace adsim {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

json yaml_to_json(const YAML::Node& node) {
    switch (node.Type()) {
        case YAML::NodeType::Null:
        case YAML::NodeType::Undefined:
            return nullptr;
        case YAML::NodeType::Scalar: {
            if (node.Tag() == "!") return node.as<std::string>();
            {
                long long v;
                if (YAML::convert<long long>::decode(node, v)) return v;
            }
            {
                double v;
                if (YAML::convert<double>::decode(node, v)) return v;
            }
            {
                bool v;
                if (YAML::convert<bool>::decode(node, v)) return v;
            }
            return node.as<std::string>();
        }
        case YAML::NodeType::Sequence: {
            json arr = json::array();
            for (const auto& item : node) arr.push_back(yaml_to_json(item));
            return arr;
        }
        case YAML::NodeType::Map: {
            json obj = json::object();
            for (const auto& kv : node)
                obj[kv.first.as<std::string>()] = yaml_to_json(kv.second);
            return obj;
        }
    }
    fail("unreadable scenario node");
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const char* where) {
    if (!obj.is_object()) fail(std::string(where) + " must be a mapping");
    for (const auto& kv : obj.items()) {
        bool ok = false;
        for (const char* k : allowed)
            if (kv.key() == k) ok = true;
        if (!ok) fail("unknown key '" + kv.key() + "' in " + where);
    }
}

double as_double(const json& j, const char* where) {
    if (!j.is_number()) fail(std::string(where) + " must be a number");
    return j.get<double>();
}

std::int64_t as_int(const json& j, const char* where) {
    if (!j.is_number_integer()) fail(std::string(where) + " must be an integer");
    return j.get<std::int64_t>();
}

std::string as_string(const json& j, const char* where) {
    if (!j.is_string()) fail(std::string(where) + " must be a string");
    return j.get<std::string>();
}

double opt_double(const json& obj, const char* key, double dflt) {
    if (!obj.contains(key)) return dflt;
    return as_double(obj.at(key), key);
}

std::int64_t opt_int(const json& obj, const char* key, std::int64_t dflt) {
    if (!obj.contains(key)) return dflt;
    return as_int(obj.at(key), key);
}

std::vector<double> as_double_array(const json& j, const char* where) {
    if (!j.is_array()) fail(std::string(where) + " must be an array");
    std::vector<double> out;
    out.reserve(j.size());
    for (const auto& v : j) out.push_back(as_double(v, where));
    return out;
}

TypeDistribution build_distribution(const json& j) {
    check_keys(j, {"kind", "n_ads", "n_slots", "scale", "slot_effects",
                   "ad_effects", "ranges", "atoms", "reserve"},
               "distribution");
    if (!j.contains("kind")) fail("distribution needs a kind");
    TypeDistribution d;
    std::string kind = as_string(j.at("kind"), "distribution.kind");
    if (kind == "ordered_polytope")
        d.kind = DistKind::ordered_polytope_uniform;
    else if (kind == "product_form")
        d.kind = DistKind::product_form;
    else if (kind == "single_slot")
        d.kind = DistKind::single_slot_independent;
    else if (kind == "finite_mixture")
        d.kind = DistKind::finite_mixture;
    else
        fail("unknown distribution kind '" + kind + "'");

    if (j.contains("atoms")) {
        const json& atoms = j.at("atoms");
        if (!atoms.is_array() || atoms.empty()) fail("atoms must be a nonempty array");
        for (const auto& aj : atoms) {
            check_keys(aj, {"weight", "p", "benefits"}, "atom");
            MixtureAtom atom;
            atom.weight = opt_double(aj, "weight", 1.0);
            if (!aj.contains("p")) fail("atom needs a p matrix");
            const json& rows = aj.at("p");
            if (!rows.is_array() || rows.empty()) fail("atom p must be a matrix");
            int n_rows = static_cast<int>(rows.size());
            std::vector<std::vector<double>> p;
            for (const auto& rj : rows) p.push_back(as_double_array(rj, "atom p row"));
            int n_cols = static_cast<int>(p[0].size());
            for (const auto& row : p)
                if (static_cast<int>(row.size()) != n_cols)
                    fail("atom p rows have unequal lengths");
            atom.matrix = ClickMatrix(n_rows, n_cols);
            for (int i = 0; i < n_rows; ++i)
                for (int l = 0; l < n_cols; ++l)
                    atom.matrix.p(i, l) = p[static_cast<size_t>(i)][static_cast<size_t>(l)];
            if (aj.contains("benefits")) {
                const json& brows = aj.at("benefits");
                if (!brows.is_array() || static_cast<int>(brows.size()) != n_rows)
                    fail("atom benefits must match the p matrix shape");
                for (int i = 0; i < n_rows; ++i) {
                    std::vector<double> row =
                        as_double_array(brows[static_cast<size_t>(i)], "atom benefits row");
                    if (static_cast<int>(row.size()) != n_cols)
                        fail("atom benefits must match the p matrix shape");
                    for (int l = 0; l < n_cols; ++l)
                        atom.matrix.set_benefit(i, l, row[static_cast<size_t>(l)]);
                }
            }
            atom.matrix.atom = static_cast<int>(d.atoms.size());
            d.atoms.push_back(std::move(atom));
        }
    }

    std::int64_t default_ads = d.atoms.empty() ? 0 : d.atoms[0].matrix.n_ads;
    d.n_ads = static_cast<int>(opt_int(j, "n_ads", default_ads));
    std::int64_t default_slots = 0;
    if (d.kind == DistKind::single_slot_independent) default_slots = 1;
    for (const auto& a : d.atoms)
        default_slots = std::max<std::int64_t>(default_slots, a.matrix.n_slots);
    d.n_slots = static_cast<int>(opt_int(j, "n_slots", default_slots));
    d.scale = opt_double(j, "scale", 1.0);

    if (j.contains("slot_effects"))
        d.slot_effects = as_double_array(j.at("slot_effects"), "slot_effects");
    if (j.contains("ad_effects")) {
        const json& effects = j.at("ad_effects");
        if (!effects.is_array()) fail("ad_effects must be an array");
        for (const auto& ej : effects) {
            check_keys(ej, {"constant", "uniform"}, "ad effect");
            AdEffect e;
            if (ej.contains("constant") == ej.contains("uniform"))
                fail("each ad effect is either constant or uniform");
            if (ej.contains("constant")) {
                e.is_constant = true;
                e.value = as_double(ej.at("constant"), "ad effect constant");
            } else {
                std::vector<double> range = as_double_array(ej.at("uniform"), "ad effect range");
                if (range.size() != 2) fail("uniform ad effect needs [lo, hi]");
                e.is_constant = false;
                e.lo = range[0];
                e.hi = range[1];
            }
            d.ad_effects.push_back(e);
        }
    }
    if (j.contains("ranges")) {
        const json& ranges = j.at("ranges");
        if (!ranges.is_array()) fail("ranges must be an array");
        for (const auto& rj : ranges) {
            std::vector<double> r = as_double_array(rj, "range");
            if (r.size() != 2) fail("each range needs [lo, hi]");
            d.ranges.emplace_back(r[0], r[1]);
        }
    }
    if (j.contains("reserve")) {
        const json& rj = j.at("reserve");
        check_keys(rj, {"price", "epsilon"}, "reserve");
        ReservePolicy rp;
        rp.reserve_R = opt_double(rj, "price", 0.0);
        rp.epsilon_no_reserve = opt_double(rj, "epsilon", 1.0);
        d.reserve = rp;
    }
    return d;
}

UtilityKind parse_utility(const std::string& s) {
    if (s == "log") return UtilityKind::log_utility;
    if (s == "isoelastic") return UtilityKind::isoelastic;
    if (s == "budget_ces") return UtilityKind::budget_ces;
    fail("unknown utility '" + s + "'");
}

AdvertiserProfile build_profile(const json& j, std::vector<double>& init_row) {
    check_keys(j, {"utility", "weight", "elasticity", "budget", "ces_exponent",
                   "ces_weights", "weights", "categories", "init_bid", "init_bids"},
               "advertiser");
    AdvertiserProfile p;
    if (!j.contains("utility")) fail("advertiser needs a utility");
    p.utility.kind = parse_utility(as_string(j.at("utility"), "utility"));
    p.utility.weight = opt_double(j, "weight", 1.0);
    p.utility.elasticity = opt_double(j, "elasticity", 2.0);
    p.utility.budget = opt_double(j, "budget", 1.0);
    p.utility.ces_exponent = opt_double(j, "ces_exponent", 0.5);
    if (j.contains("ces_weights"))
        p.utility.ces_weights = as_double_array(j.at("ces_weights"), "ces_weights");
    if (j.contains("weights"))
        p.weights = as_double_array(j.at("weights"), "weights");
    if (j.contains("categories")) {
        const json& cj = j.at("categories");
        check_keys(cj, {"n_categories", "category_of_atom"}, "categories");
        CategoryScheme scheme;
        scheme.n_categories = static_cast<int>(opt_int(cj, "n_categories", 1));
        if (cj.contains("category_of_atom"))
            for (const auto& v : cj.at("category_of_atom"))
                scheme.category_of_atom.push_back(
                    static_cast<int>(as_int(v, "category_of_atom")));
        p.categories = std::move(scheme);
    }
    int K = p.n_categories();
    if (j.contains("init_bids")) {
        init_row = as_double_array(j.at("init_bids"), "init_bids");
        if (static_cast<int>(init_row.size()) != K)
            fail("init_bids length does not match the category count");
    } else {
        init_row.assign(static_cast<size_t>(K), opt_double(j, "init_bid", 1.0));
    }
    return p;
}

ChargeScheme parse_pricing(const std::string& s) {
    if (s == "randomized") return ChargeScheme::randomized;
    if (s == "vcg_rebate") return ChargeScheme::vcg_rebate;
    if (s == "leonard") return ChargeScheme::leonard;
    fail("unknown pricing scheme '" + s + "'");
}

NoiseMode parse_noise(const std::string& s) {
    if (s == "frozen_pool") return NoiseMode::frozen_pool_crn;
    if (s == "fresh_samples") return NoiseMode::fresh_samples;
    if (s == "exact") return NoiseMode::exact;
    fail("unknown noise mode '" + s + "'");
}

UpdateRule parse_rule(const std::string& s) {
    if (s == "proportional") return UpdateRule::proportional;
    if (s == "sign") return UpdateRule::sign_rule;
    fail("unknown update rule '" + s + "'");
}

Scenario build_scenario(const json& j) {
    check_keys(j, {"name", "seed", "distribution", "advertisers", "mechanism",
                   "equilibrium", "dynamics", "oracle"},
               "scenario");
    Scenario s;
    if (j.contains("name")) s.name = as_string(j.at("name"), "name");
    if (j.contains("seed")) {
        const json& sj = j.at("seed");
        if (sj.is_number_unsigned()) {
            s.seed = sj.get<std::uint64_t>();
        } else {
            std::int64_t v = as_int(sj, "seed");
            if (v < 0) fail("seed must be nonnegative");
            s.seed = static_cast<std::uint64_t>(v);
        }
    }
    if (!j.contains("distribution")) fail("scenario needs a distribution");
    s.distribution = build_distribution(j.at("distribution"));
    if (!j.contains("advertisers") || !j.at("advertisers").is_array() ||
        j.at("advertisers").empty())
        fail("scenario needs a nonempty advertisers array");
    for (const auto& aj : j.at("advertisers")) {
        std::vector<double> row;
        s.profiles.push_back(build_profile(aj, row));
        s.init_bids.per_category.push_back(std::move(row));
    }
    if (j.contains("mechanism")) {
        const json& mj = j.at("mechanism");
        check_keys(mj, {"pricing"}, "mechanism");
        if (mj.contains("pricing"))
            s.mechanism.pricing = parse_pricing(as_string(mj.at("pricing"), "pricing"));
    }
    if (j.contains("equilibrium")) {
        const json& ej = j.at("equilibrium");
        check_keys(ej, {"residual_tol", "max_sweeps", "step0", "step_decay_sweeps",
                        "step_min", "pool_size"},
                   "equilibrium");
        s.equilibrium.residual_tol = opt_double(ej, "residual_tol", s.equilibrium.residual_tol);
        s.equilibrium.max_sweeps = static_cast<int>(opt_int(ej, "max_sweeps", s.equilibrium.max_sweeps));
        s.equilibrium.step0 = opt_double(ej, "step0", s.equilibrium.step0);
        s.equilibrium.step_decay_sweeps =
            opt_double(ej, "step_decay_sweeps", s.equilibrium.step_decay_sweeps);
        s.equilibrium.step_min = opt_double(ej, "step_min", s.equilibrium.step_min);
        s.equilibrium.pool_size = opt_int(ej, "pool_size", s.equilibrium.pool_size);
    }
    if (j.contains("dynamics")) {
        const json& dj = j.at("dynamics");
        check_keys(dj, {"step_size", "feedback_window", "horizon", "noise_mode",
                        "update_rule", "tol"},
                   "dynamics");
        if (dj.contains("step_size")) {
            if (dj.at("step_size").is_array())
                s.dynamics.step_size = as_double_array(dj.at("step_size"), "step_size");
            else
                s.dynamics.step_size = {as_double(dj.at("step_size"), "step_size")};
        }
        s.dynamics.feedback_window =
            opt_int(dj, "feedback_window", s.dynamics.feedback_window);
        s.dynamics.horizon = static_cast<int>(opt_int(dj, "horizon", s.dynamics.horizon));
        if (dj.contains("noise_mode"))
            s.dynamics.noise_mode = parse_noise(as_string(dj.at("noise_mode"), "noise_mode"));
        if (dj.contains("update_rule"))
            s.dynamics.update_rule = parse_rule(as_string(dj.at("update_rule"), "update_rule"));
        s.dynamics.tol = opt_double(dj, "tol", s.dynamics.tol);
    }
    if (j.contains("oracle")) {
        const json& oj = j.at("oracle");
        check_keys(oj, {"gap_tol", "max_iters"}, "oracle");
        s.oracle.gap_tol = opt_double(oj, "gap_tol", s.oracle.gap_tol);
        s.oracle.max_iters = opt_int(oj, "max_iters", s.oracle.max_iters);
    }
    s.validate();
    return s;
}

json distribution_to_json(const TypeDistribution& d) {
    json j = json::object();
    switch (d.kind) {
        case DistKind::ordered_polytope_uniform: j["kind"] = "ordered_polytope"; break;
        case DistKind::product_form: j["kind"] = "product_form"; break;
        case DistKind::single_slot_independent: j["kind"] = "single_slot"; break;
        case DistKind::finite_mixture: j["kind"] = "finite_mixture"; break;
    }
    j["n_ads"] = d.n_ads;
    j["n_slots"] = d.n_slots;
    if (d.kind == DistKind::ordered_polytope_uniform) j["scale"] = d.scale;
    if (!d.slot_effects.empty()) j["slot_effects"] = d.slot_effects;
    if (!d.ad_effects.empty()) {
        json effects = json::array();
        for (const AdEffect& e : d.ad_effects) {
            json ej = json::object();
            if (e.is_constant)
                ej["constant"] = e.value;
            else
                ej["uniform"] = std::vector<double>{e.lo, e.hi};
            effects.push_back(std::move(ej));
        }
        j["ad_effects"] = std::move(effects);
    }
    if (!d.ranges.empty()) {
        json ranges = json::array();
        for (const auto& r : d.ranges)
            ranges.push_back(std::vector<double>{r.first, r.second});
        j["ranges"] = std::move(ranges);
    }
    if (!d.atoms.empty()) {
        json atoms = json::array();
        for (const MixtureAtom& a : d.atoms) {
            json aj = json::object();
            aj["weight"] = a.weight;
            json rows = json::array();
            for (int i = 0; i < a.matrix.n_ads; ++i) {
                json row = json::array();
                for (int l = 0; l < a.matrix.n_slots; ++l) row.push_back(a.matrix.p(i, l));
                rows.push_back(std::move(row));
            }
            aj["p"] = std::move(rows);
            if (a.matrix.has_benefits()) {
                json brows = json::array();
                for (int i = 0; i < a.matrix.n_ads; ++i) {
                    json row = json::array();
                    for (int l = 0; l < a.matrix.n_slots; ++l) row.push_back(a.matrix.q(i, l));
                    brows.push_back(std::move(row));
                }
                aj["benefits"] = std::move(brows);
            }
            atoms.push_back(std::move(aj));
        }
        j["atoms"] = std::move(atoms);
    }
    if (d.reserve) {
        j["reserve"] = json::object();
        j["reserve"]["price"] = d.reserve->reserve_R;
        j["reserve"]["epsilon"] = d.reserve->epsilon_no_reserve;
    }
    return j;
}

json scenario_to_json(const Scenario& s) {
    json j = json::object();
    j["name"] = s.name;
    j["seed"] = s.seed;
    j["distribution"] = distribution_to_json(s.distribution);
    json ads = json::array();
    for (size_t i = 0; i < s.profiles.size(); ++i) {
        const AdvertiserProfile& p = s.profiles[i];
        json aj = json::object();
        switch (p.utility.kind) {
            case UtilityKind::log_utility: aj["utility"] = "log"; break;
            case UtilityKind::isoelastic: aj["utility"] = "isoelastic"; break;
            case UtilityKind::budget_ces: aj["utility"] = "budget_ces"; break;
        }
        if (p.utility.kind == UtilityKind::budget_ces) {
            aj["budget"] = p.utility.budget;
            aj["ces_exponent"] = p.utility.ces_exponent;
            aj["ces_weights"] = p.utility.ces_weights;
        } else {
            aj["weight"] = p.utility.weight;
            if (p.utility.kind == UtilityKind::isoelastic)
                aj["elasticity"] = p.utility.elasticity;
        }
        if (!p.weights.empty()) aj["weights"] = p.weights;
        if (p.categories) {
            aj["categories"] = json::object();
            aj["categories"]["n_categories"] = p.categories->n_categories;
            aj["categories"]["category_of_atom"] = p.categories->category_of_atom;
        }
        aj["init_bids"] = s.init_bids.per_category[i];
        ads.push_back(std::move(aj));
    }
    j["advertisers"] = std::move(ads);
    j["mechanism"] = json::object();
    switch (s.mechanism.pricing) {
        case ChargeScheme::randomized: j["mechanism"]["pricing"] = "randomized"; break;
        case ChargeScheme::vcg_rebate: j["mechanism"]["pricing"] = "vcg_rebate"; break;
        case ChargeScheme::leonard: j["mechanism"]["pricing"] = "leonard"; break;
    }
    j["equilibrium"] = {{"residual_tol", s.equilibrium.residual_tol},
                        {"max_sweeps", s.equilibrium.max_sweeps},
                        {"step0", s.equilibrium.step0},
                        {"step_decay_sweeps", s.equilibrium.step_decay_sweeps},
                        {"step_min", s.equilibrium.step_min},
                        {"pool_size", s.equilibrium.pool_size}};
    json dj = json::object();
    dj["step_size"] = s.dynamics.step_size;
    dj["feedback_window"] = s.dynamics.feedback_window;
    dj["horizon"] = s.dynamics.horizon;
    switch (s.dynamics.noise_mode) {
        case NoiseMode::frozen_pool_crn: dj["noise_mode"] = "frozen_pool"; break;
        case NoiseMode::fresh_samples: dj["noise_mode"] = "fresh_samples"; break;
        case NoiseMode::exact: dj["noise_mode"] = "exact"; break;
    }
    dj["update_rule"] =
        s.dynamics.update_rule == UpdateRule::proportional ? "proportional" : "sign";
    dj["tol"] = s.dynamics.tol;
    j["dynamics"] = std::move(dj);
    j["oracle"] = {{"gap_tol", s.oracle.gap_tol}, {"max_iters", s.oracle.max_iters}};
    return j;
}

} // namespace

void Scenario::validate() const {
    distribution.validate();
    if (profiles.empty()) fail("scenario needs at least one advertiser");
    if (static_cast<int>(profiles.size()) != distribution.n_ads)
        fail("advertiser count does not match the distribution");
    init_bids.validate();
    if (init_bids.per_category.size() != profiles.size())
        fail("initial bids do not match the advertiser count");
    for (size_t i = 0; i < profiles.size(); ++i) {
        profiles[i].validate();
        if (static_cast<int>(init_bids.per_category[i].size()) != profiles[i].n_categories())
            fail("initial bids do not match the category count");
        for (double b : init_bids.per_category[i])
            if (!(b > 0.0)) fail("initial bids must be strictly positive");
        if (profiles[i].categories) {
            if (distribution.kind != DistKind::finite_mixture)
                fail("category schemes need a finite mixture distribution");
            if (profiles[i].categories->category_of_atom.size() !=
                distribution.atoms.size())
                fail("category map does not cover the mixture atoms");
        }
    }
    dynamics.validate(static_cast<int>(profiles.size()));
    if (dynamics.noise_mode == NoiseMode::exact &&
        distribution.kind != DistKind::finite_mixture)
        fail("exact feedback needs a finite mixture distribution");
    if (equilibrium.pool_size < 2) fail("equilibrium pool must hold at least 2 instances");
    if (!(equilibrium.residual_tol > 0.0)) fail("equilibrium tolerance must be positive");
    if (equilibrium.max_sweeps < 1) fail("equilibrium needs at least one sweep");
    if (!(equilibrium.step0 > 0.0) || equilibrium.step0 > 1.0)
        fail("equilibrium step0 must lie in (0, 1]");
    if (!(equilibrium.step_min > 0.0) || equilibrium.step_min > equilibrium.step0)
        fail("equilibrium step_min must lie in (0, step0]");
    if (!(equilibrium.step_decay_sweeps > 0.0))
        fail("equilibrium step decay must be positive");
    if (!(oracle.gap_tol > 0.0)) fail("oracle gap tolerance must be positive");
    if (oracle.max_iters < 1) fail("oracle needs at least one iteration");
}

Scenario parse_scenario(const std::string& text) {
    size_t first = text.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) fail("empty scenario text");
    json j;
    if (text[first] == '{') {
        try {
            j = json::parse(text);
        } catch (const json::exception& e) {
            fail(std::string("scenario JSON: ") + e.what());
        }
    } else {
        try {
            j = yaml_to_json(YAML::Load(text));
        } catch (const YAML::Exception& e) {
            fail(std::string("scenario YAML: ") + e.what());
        }
    }
    return build_scenario(j);
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot read scenario file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

std::string serialize_scenario(const Scenario& s) {
    s.validate();
    return scenario_to_json(s).dump(2) + "\n";
}

std::uint64_t scenario_hash(const Scenario& s) {
    std::string text = serialize_scenario(s);
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace adsim
