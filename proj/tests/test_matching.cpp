#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "adsim/matching.hpp"
#include "adsim/rng.hpp"
#include "oracles.hpp"

using namespace adsim;

namespace {

ClickMatrix random_instance(Philox& rng, int ads, int slots, bool with_benefits) {
    ClickMatrix cm(ads, slots);
    for (int i = 0; i < ads; ++i)
        for (int l = 0; l < slots; ++l) cm.p(i, l) = rng.uniform01();
    if (with_benefits)
        for (int i = 0; i < ads; ++i)
            for (int l = 0; l < slots; ++l)
                cm.set_benefit(i, l, rng.uniform(-0.5, 0.5));
    return cm;
}

std::vector<double> random_bids(Philox& rng, int ads) {
    std::vector<double> b(ads);
    for (double& x : b) x = rng.uniform(0.0, 3.0);
    return b;
}

} // namespace

TEST_CASE("single pair instance assigns the only advert") {
    ClickMatrix cm(1, 1);
    cm.p(0, 0) = 0.5;
    Matching m = solve_assignment(cm, {2.0});
    CHECK(m.slot_of[0] == 0);
    CHECK(m.objective == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(m.ctr[0] == doctest::Approx(0.5));
}

TEST_CASE("single slot goes to the highest bid-probability product") {
    ClickMatrix cm(2, 1);
    cm.p(0, 0) = 0.6;
    cm.p(1, 0) = 0.2;
    Matching m = solve_assignment(cm, {1.0, 2.0});  // products 0.6 vs 0.4
    CHECK(m.slot_of[0] == 0);
    CHECK(m.slot_of[1] == -1);
    CHECK(m.objective == doctest::Approx(0.6));
}

TEST_CASE("solver objective equals the enumeration oracle") {
    Philox rng(11, 0);
    for (int trial = 0; trial < 300; ++trial) {
        int ads = 1 + static_cast<int>(rng.below(5));
        int slots = 1 + static_cast<int>(rng.below(5));
        ClickMatrix cm = random_instance(rng, ads, slots, trial % 2 == 0);
        std::vector<double> bids = random_bids(rng, ads);
        if (trial % 7 == 0) bids[rng.below(ads)] = 0.0;
        Matching fast = solve_assignment(cm, bids);
        Matching slow = enumerate_matchings(cm, bids);
        CHECK(std::abs(fast.objective - slow.objective) <= 1e-12);
        CHECK(fast.slot_of == slow.slot_of);
    }
}

TEST_CASE("enumeration handles the hand-checked two-by-two case") {
    ClickMatrix cm(2, 2);
    cm.p(0, 0) = 0.9; cm.p(0, 1) = 0.1;
    cm.p(1, 0) = 0.8; cm.p(1, 1) = 0.2;
    Matching m = enumerate_matchings(cm, {1.0, 1.0});
    CHECK(m.slot_of == std::vector<int>{0, 1});
    CHECK(m.objective == doctest::Approx(1.1));
}

TEST_CASE("enumeration with all-zero bids returns the empty matching") {
    ClickMatrix cm(3, 2);
    for (int i = 0; i < 3; ++i)
        for (int l = 0; l < 2; ++l) cm.p(i, l) = 0.5;
    Matching m = enumerate_matchings(cm, {0.0, 0.0, 0.0});
    CHECK(m.slot_of == std::vector<int>{-1, -1, -1});
    CHECK(m.objective == 0.0);
}

TEST_CASE("exact ties resolve to the lexicographically smallest slots") {
    ClickMatrix cm(2, 2);
    for (int i = 0; i < 2; ++i)
        for (int l = 0; l < 2; ++l) cm.p(i, l) = 0.5;
    Matching fast = solve_assignment(cm, {1.0, 1.0});
    Matching slow = enumerate_matchings(cm, {1.0, 1.0});
    CHECK(fast.slot_of == std::vector<int>{0, 1});
    CHECK(slow.slot_of == std::vector<int>{0, 1});

    ClickMatrix one(2, 1);
    one.p(0, 0) = 0.5;
    one.p(1, 0) = 0.5;
    Matching m1 = solve_assignment(one, {1.0, 1.0});
    CHECK(m1.slot_of == std::vector<int>{0, -1});
}

TEST_CASE("zero-bid advertisers are never assigned") {
    Philox rng(12, 0);
    for (int trial = 0; trial < 100; ++trial) {
        int ads = 2 + static_cast<int>(rng.below(4));
        int slots = 1 + static_cast<int>(rng.below(4));
        ClickMatrix cm = random_instance(rng, ads, slots, false);
        std::vector<double> bids = random_bids(rng, ads);
        int mute = static_cast<int>(rng.below(ads));
        bids[mute] = 0.0;
        Matching m = solve_assignment(cm, bids);
        CHECK(m.slot_of[mute] == -1);
        for (double& b : bids) b *= 10.0;
        bids[mute] = 0.0;
        Matching m2 = solve_assignment(cm, bids);
        CHECK(m2.slot_of[mute] == -1);
    }
}

TEST_CASE("negative-weight pairs stay unassigned") {
    ClickMatrix cm(2, 2);
    cm.p(0, 0) = 0.5; cm.p(0, 1) = 0.4;
    cm.p(1, 0) = 0.3; cm.p(1, 1) = 0.2;
    for (int i = 0; i < 2; ++i)
        for (int l = 0; l < 2; ++l) cm.set_benefit(i, l, -10.0);
    Matching m = solve_assignment(cm, {1.0, 1.0});
    CHECK(m.slot_of == std::vector<int>{-1, -1});
    CHECK(m.objective == 0.0);
}

TEST_CASE("objective is monotone in any single bid") {
    Philox rng(13, 0);
    for (int trial = 0; trial < 100; ++trial) {
        int ads = 2 + static_cast<int>(rng.below(3));
        int slots = 1 + static_cast<int>(rng.below(3));
        ClickMatrix cm = random_instance(rng, ads, slots, false);
        std::vector<double> bids = random_bids(rng, ads);
        int i = static_cast<int>(rng.below(ads));
        double lo = solve_assignment(cm, bids).objective;
        bids[i] += rng.uniform(0.0, 2.0);
        double hi = solve_assignment(cm, bids).objective;
        CHECK(hi >= lo - 1e-12);
    }
}

TEST_CASE("dual prices: single-slot competition") {
    ClickMatrix cm(2, 1);
    cm.p(0, 0) = 0.6;
    cm.p(1, 0) = 0.2;
    std::vector<double> bids{1.0, 2.0};
    Matching m = solve_assignment(cm, bids);
    DualPrices d = solve_dual(cm, bids, m);
    CHECK(d.slot_price[0] == doctest::Approx(0.4).epsilon(1e-9));
    CHECK(d.ad_surplus[0] == doctest::Approx(0.2).epsilon(1e-9));
    CHECK(d.ad_surplus[1] == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("dual prices: a lone advertiser pays nothing") {
    ClickMatrix cm(1, 1);
    cm.p(0, 0) = 0.5;
    std::vector<double> bids{2.0};
    Matching m = solve_assignment(cm, bids);
    DualPrices d = solve_dual(cm, bids, m);
    CHECK(d.slot_price[0] == doctest::Approx(0.0));
    CHECK(d.ad_surplus[0] == doctest::Approx(1.0));
}

TEST_CASE("dual prices match the vertex-enumeration oracle") {
    Philox rng(14, 0);
    for (int trial = 0; trial < 60; ++trial) {
        int ads = 1 + static_cast<int>(rng.below(4));
        int slots = 1 + static_cast<int>(rng.below(4));
        ClickMatrix cm = random_instance(rng, ads, slots, false);
        std::vector<double> bids = random_bids(rng, ads);
        Matching m = solve_assignment(cm, bids);
        DualPrices d = solve_dual(cm, bids, m);
        oracles::DualOracle ref = oracles::min_dual_by_vertex_enumeration(cm, bids);
        REQUIRE(ref.found);
        double total = 0.0;
        for (double v : d.slot_price) total += v;
        CHECK(total == doctest::Approx(ref.total_slot_price).epsilon(1e-6));
        for (int l = 0; l < slots; ++l)
            CHECK(d.slot_price[l] == doctest::Approx(ref.slot_price[l]).epsilon(1e-6));
    }
}

TEST_CASE("primal-dual certificate holds on random instances") {
    Philox rng(15, 0);
    for (int trial = 0; trial < 100; ++trial) {
        int ads = 1 + static_cast<int>(rng.below(5));
        int slots = 1 + static_cast<int>(rng.below(5));
        ClickMatrix cm = random_instance(rng, ads, slots, false);
        std::vector<double> bids = random_bids(rng, ads);
        Matching m = solve_assignment(cm, bids);
        DualPrices d = solve_dual(cm, bids, m);
        double sum = 0.0;
        for (double s : d.ad_surplus) { CHECK(s >= 0.0); sum += s; }
        for (double v : d.slot_price) { CHECK(v >= 0.0); sum += v; }
        CHECK(sum == doctest::Approx(m.objective).epsilon(1e-7));
        for (int i = 0; i < ads; ++i)
            for (int l = 0; l < slots; ++l)
                CHECK(d.ad_surplus[i] + d.slot_price[l] >= bids[i] * cm.p(i, l) - 1e-7);
    }
}

TEST_CASE("layout auction: single layout wins by default") {
    std::vector<Layout> layouts{{"only", {0.3, 0.1}}};
    LayoutChoice c = solve_layout_auction(layouts, {1.0, 1.0});
    CHECK(c.layout_index == 0);
    CHECK(c.objective == doctest::Approx(0.4));
}

TEST_CASE("layout auction: image page beats weak text arrangement") {
    // Text optimum totals 0.9; one image advert offers 1.1 alone.
    ClickMatrix text(2, 2);
    text.p(0, 0) = 0.5; text.p(0, 1) = 0.2;
    text.p(1, 0) = 0.4; text.p(1, 1) = 0.4;
    ImageTextChoice c = solve_image_text(text, {1.0, 1.0}, {0.55}, {2.0});
    CHECK(c.text.objective == doctest::Approx(0.9));
    CHECK(c.image_chosen);
    CHECK(c.image_index == 0);
    CHECK(c.objective == doctest::Approx(1.1));
}

TEST_CASE("layout auction over slot permutations agrees with the matching solver") {
    Philox rng(16, 0);
    for (int trial = 0; trial < 50; ++trial) {
        int ads = 1 + static_cast<int>(rng.below(3));
        int slots = 1 + static_cast<int>(rng.below(3));
        ClickMatrix cm = random_instance(rng, ads, slots, false);
        std::vector<double> bids = random_bids(rng, ads);
        // One layout per injective assignment of advertisers to slots.
        std::vector<Layout> layouts;
        std::vector<int> slot_of(ads, -1);
        auto rec = [&](auto&& self, int i, unsigned used) -> void {
            if (i == ads) {
                Layout lay;
                lay.id = "a";
                for (int k = 0; k < ads; ++k) lay.id += std::to_string(slot_of[k] + 1);
                lay.ctr_of.assign(ads, 0.0);
                for (int k = 0; k < ads; ++k)
                    if (slot_of[k] >= 0) lay.ctr_of[k] = cm.p(k, slot_of[k]);
                layouts.push_back(std::move(lay));
                return;
            }
            slot_of[i] = -1;
            self(self, i + 1, used);
            for (int l = 0; l < slots; ++l) {
                if (used & (1u << l)) continue;
                slot_of[i] = l;
                self(self, i + 1, used | (1u << l));
            }
            slot_of[i] = -1;
        };
        rec(rec, 0, 0u);
        LayoutChoice c = solve_layout_auction(layouts, bids);
        Matching m = solve_assignment(cm, bids);
        CHECK(c.objective == doctest::Approx(m.objective).epsilon(1e-12));
    }
}

TEST_CASE("invalid inputs are rejected") {
    ClickMatrix cm(2, 1);
    cm.p(0, 0) = 0.6;
    cm.p(1, 0) = 0.2;
    CHECK_THROWS_AS(solve_assignment(cm, {1.0}), std::invalid_argument);
    CHECK_THROWS_AS(solve_assignment(cm, {1.0, -0.5}), std::invalid_argument);
    CHECK_THROWS_AS(solve_assignment(cm, {1.0, std::nan("")}), std::invalid_argument);

    ClickMatrix bad(1, 1);
    bad.p(0, 0) = 1.5;
    CHECK_THROWS_AS(solve_assignment(bad, {1.0}), std::invalid_argument);

    ClickMatrix withq(1, 1);
    withq.p(0, 0) = 0.5;
    withq.set_benefit(0, 0, 0.25);
    Matching m = solve_assignment(withq, {1.0});
    CHECK_THROWS_AS(solve_dual(withq, {1.0}, m), std::invalid_argument);

    CHECK_THROWS_AS(solve_layout_auction({}, {1.0}), std::invalid_argument);

    ClickMatrix big(6, 6);
    // enumeration guard is about dimensions, not contents
    CHECK_NOTHROW(enumerate_matchings(big, std::vector<double>(6, 1.0)));
    ClickMatrix huge(9, 2);
    CHECK_THROWS_AS(enumerate_matchings(huge, std::vector<double>(9, 1.0)),
                    std::invalid_argument);
}
