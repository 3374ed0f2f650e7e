#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adsim/advertisers.hpp"
#include "adsim/dynamics.hpp"
#include "adsim/equilibrium.hpp"
#include "adsim/pricing.hpp"
#include "adsim/search_model.hpp"

namespace adsim {

struct MechanismOptions {
    ChargeScheme pricing = ChargeScheme::randomized;
};

struct OracleConfig {
    double gap_tol = 1e-5;
    long max_iters = 500000;
};

// A complete experiment description: who bids, how searches are drawn, which
// pricing scheme runs, and every solver knob. One file, one experiment.
struct Scenario {
    std::string name;
    std::uint64_t seed = 0;
    TypeDistribution distribution;
    std::vector<AdvertiserProfile> profiles;
    BidProfile init_bids;
    MechanismOptions mechanism;
    EquilibriumConfig equilibrium;
    DynamicsConfig dynamics;
    OracleConfig oracle;

    void validate() const;
};

// Parse a scenario from YAML or JSON text (JSON is detected by a leading
// '{'). Unknown keys and malformed values raise std::invalid_argument.
Scenario parse_scenario(const std::string& text);

// Read and parse a scenario file.
Scenario load_scenario(const std::string& path);

// Canonical JSON serialization: object keys sorted, defaults spelled out.
// parse(serialize(s)) reproduces s and serialize is a fixed point on its
// own output, which makes the text safe to hash.
std::string serialize_scenario(const Scenario& s);

// FNV-1a over the canonical serialization.
std::uint64_t scenario_hash(const Scenario& s);

} // namespace adsim
