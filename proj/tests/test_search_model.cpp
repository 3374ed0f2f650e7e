#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <vector>

#include "adsim/search_model.hpp"

using namespace adsim;

namespace {

TypeDistribution polytope(int ads, int slots, double scale = 1.0) {
    TypeDistribution d;
    d.kind = DistKind::ordered_polytope_uniform;
    d.n_ads = ads;
    d.n_slots = slots;
    d.scale = scale;
    return d;
}

TypeDistribution product(std::vector<double> slots, std::vector<AdEffect> ads) {
    TypeDistribution d;
    d.kind = DistKind::product_form;
    d.n_ads = static_cast<int>(ads.size());
    d.slot_effects = std::move(slots);
    d.ad_effects = std::move(ads);
    return d;
}

TypeDistribution lone_uniform() {
    TypeDistribution d;
    d.kind = DistKind::single_slot_independent;
    d.n_ads = 1;
    d.ranges = {{0.0, 1.0}};
    return d;
}

TypeDistribution two_atom_mixture() {
    TypeDistribution d;
    d.kind = DistKind::finite_mixture;
    d.n_ads = 1;
    MixtureAtom a, b;
    a.weight = 0.3;
    a.matrix = ClickMatrix(1, 1);
    a.matrix.p(0, 0) = 0.8;
    b.weight = 0.7;
    b.matrix = ClickMatrix(1, 1);
    b.matrix.p(0, 0) = 0.4;
    d.atoms = {a, b};
    return d;
}

} // namespace

TEST_CASE("one-atom mixture reproduces the atom verbatim") {
    TypeDistribution d;
    d.kind = DistKind::finite_mixture;
    d.n_ads = 2;
    MixtureAtom a;
    a.weight = 1.0;
    a.matrix = ClickMatrix(2, 2);
    a.matrix.p(0, 0) = 0.9; a.matrix.p(0, 1) = 0.3;
    a.matrix.p(1, 0) = 0.5; a.matrix.p(1, 1) = 0.1;
    d.atoms = {a};
    ClickMatrix cm = sample_click_matrix(d, 7, 0);
    CHECK(cm.probs == a.matrix.probs);
    CHECK(cm.atom == 0);
}

TEST_CASE("degenerate product form fills identical rows") {
    TypeDistribution d = product({0.5, 0.25}, {{true, 1.0, 0, 0}, {true, 1.0, 0, 0}});
    ClickMatrix cm = sample_click_matrix(d, 3, 5);
    for (int i = 0; i < 2; ++i) {
        CHECK(cm.p(i, 0) == doctest::Approx(0.5));
        CHECK(cm.p(i, 1) == doctest::Approx(0.25));
    }
}

TEST_CASE("polytope draws are ordered with order-statistic means") {
    const int N = 100000, L = 2;
    TypeDistribution d = polytope(1, L, 1.0);
    double sum1 = 0, sum2 = 0, sq1 = 0, sq2 = 0;
    for (int k = 0; k < N; ++k) {
        ClickMatrix cm = sample_click_matrix(d, 42, static_cast<std::uint64_t>(k));
        REQUIRE(cm.p(0, 0) >= cm.p(0, 1));
        sum1 += cm.p(0, 0); sq1 += cm.p(0, 0) * cm.p(0, 0);
        sum2 += cm.p(0, 1); sq2 += cm.p(0, 1) * cm.p(0, 1);
    }
    double m1 = sum1 / N, m2 = sum2 / N;
    double se1 = std::sqrt((sq1 / N - m1 * m1) / (N - 1));
    double se2 = std::sqrt((sq2 / N - m2 * m2) / (N - 1));
    // Descending order statistics of two uniforms: means 2/3 and 1/3.
    CHECK(std::abs(m1 - 2.0 / 3.0) <= 3 * se1);
    CHECK(std::abs(m2 - 1.0 / 3.0) <= 3 * se2);
}

TEST_CASE("lone advertiser over uniform support estimates one half") {
    CtrEstimate est = estimate_ctr(lone_uniform(), BidProfile::flat({1.0}), 20000, 9);
    CHECK(std::abs(est.y_hat[0][0] - 0.5) <= 4 * est.std_err[0][0]);
    CHECK(est.std_err[0][0] > 0.0);
}

TEST_CASE("zero bid estimates exactly zero") {
    CtrEstimate est = estimate_ctr(polytope(2, 2), BidProfile::flat({0.0, 1.0}), 500, 1);
    CHECK(est.y_hat[0][0] == 0.0);
    CHECK(est.std_err[0][0] == 0.0);
}

TEST_CASE("symmetric advertisers estimate equal rates") {
    CtrEstimate est = estimate_ctr(polytope(2, 2), BidProfile::flat({1.0, 1.0}), 20000, 2);
    double pooled = std::hypot(est.std_err[0][0], est.std_err[1][0]);
    CHECK(std::abs(est.y_hat[0][0] - est.y_hat[1][0]) <= 4 * pooled);
}

TEST_CASE("rates stay within slot bounds") {
    CtrEstimate est = estimate_ctr(polytope(3, 2), BidProfile::flat({2.0, 0.5, 1.0}), 3000, 3);
    for (int i = 0; i < 3; ++i) {
        CHECK(est.y_hat[i][0] >= 0.0);
        CHECK(est.y_hat[i][0] <= 1.0);
    }
}

TEST_CASE("shared instance stream makes averaged rates monotone in own bid") {
    TypeDistribution d = polytope(3, 2);
    std::vector<double> bids{0.5, 0.8, 1.2};
    double prev = -1.0;
    for (double b : {0.2, 0.5, 0.9, 1.4, 2.0}) {
        bids[0] = b;
        CtrEstimate est = estimate_ctr(d, BidProfile::flat(bids), 1500, 77);
        CHECK(est.y_hat[0][0] >= prev);
        prev = est.y_hat[0][0];
    }
}

TEST_CASE("identical seeds reproduce estimates bit for bit") {
    TypeDistribution d = polytope(2, 2);
    CtrEstimate a = estimate_ctr(d, BidProfile::flat({1.0, 0.7}), 2000, 5);
    CtrEstimate b = estimate_ctr(d, BidProfile::flat({1.0, 0.7}), 2000, 5);
    CHECK(a.y_hat == b.y_hat);
    CHECK(a.std_err == b.std_err);
}

TEST_CASE("worker count does not change the estimate") {
    TypeDistribution d = polytope(3, 2);
    BidProfile bids = BidProfile::flat({1.0, 0.7, 1.4});
    setenv("ADSIM_WORKERS", "1", 1);
    CtrEstimate a = estimate_ctr(d, bids, 5000, 6);
    setenv("ADSIM_WORKERS", "4", 1);
    CtrEstimate b = estimate_ctr(d, bids, 5000, 6);
    unsetenv("ADSIM_WORKERS");
    CHECK(a.y_hat == b.y_hat);
    CHECK(a.std_err == b.std_err);
}

TEST_CASE("pool evaluation equals streaming evaluation") {
    TypeDistribution d = polytope(2, 2);
    BidProfile bids = BidProfile::flat({1.0, 0.6});
    InstancePool pool = sample_pool(d, 3000, 11, 0);
    CtrEstimate a = ctr_on_pool(pool, bids);
    CtrEstimate b = estimate_ctr(d, bids, 3000, 11, 0);
    CHECK(a.y_hat == b.y_hat);
}

TEST_CASE("exact mixture rates match hand arithmetic and sampling") {
    TypeDistribution d = two_atom_mixture();
    BidProfile bids = BidProfile::flat({1.0});
    auto exact = exact_ctr(d, bids);
    CHECK(exact[0][0] == doctest::Approx(0.3 * 0.8 + 0.7 * 0.4).epsilon(1e-15));
    CtrEstimate est = estimate_ctr(d, bids, 20000, 13);
    CHECK(std::abs(est.y_hat[0][0] - exact[0][0]) <= 4 * est.std_err[0][0]);
}

TEST_CASE("categories split rates by atom") {
    TypeDistribution d = two_atom_mixture();
    SchemeList schemes{CategoryScheme{2, {0, 1}}};
    BidProfile bids;
    bids.per_category = {{1.0, 2.0}};
    auto exact = exact_ctr(d, bids, schemes);
    CHECK(exact[0][0] == doctest::Approx(0.3 * 0.8));
    CHECK(exact[0][1] == doctest::Approx(0.7 * 0.4));
    CtrEstimate est = estimate_ctr(d, bids, 20000, 14, 0, schemes);
    for (int k = 0; k < 2; ++k)
        CHECK(std::abs(est.y_hat[0][k] - exact[0][k]) <= 4 * est.std_err[0][k]);
}

TEST_CASE("probe over a single zero bid gives the zero curve") {
    ProbeCurve c = monotonicity_probe(polytope(2, 1), BidProfile::flat({1.0, 1.0}),
                                      0, {0.0}, 500, 15);
    REQUIRE(c.y_hat.size() == 1);
    CHECK(c.y_hat[0] == 0.0);
}

TEST_CASE("probe sees a strictly increasing curve on the polytope family") {
    std::vector<double> grid;
    for (int k = 0; k < 15; ++k) grid.push_back(0.1 + 0.13 * k);
    ProbeCurve c = monotonicity_probe(polytope(2, 1), BidProfile::flat({1.0, 1.0}),
                                      0, grid, 2000, 16);
    CHECK(c.strictly_increasing);
    CHECK(c.flat_segments == 0);
}

TEST_CASE("probe flags the flat steps of a constant-quality product form") {
    TypeDistribution d = product({0.5, 0.25},
                                 {{true, 1.0, 0, 0}, {true, 1.0, 0, 0}});
    std::vector<double> grid;
    for (int k = 0; k < 12; ++k) grid.push_back(0.2 + 0.15 * k);
    ProbeCurve c = monotonicity_probe(d, BidProfile::flat({1.0, 1.0}),
                                      0, grid, 400, 17);
    CHECK_FALSE(c.strictly_increasing);
    CHECK(c.flat_segments > 0);
}

TEST_CASE("certain reserve leaves the matrix stream untouched") {
    TypeDistribution plain = polytope(2, 2);
    TypeDistribution with = plain;
    with.reserve = ReservePolicy{5.0, 1.0};
    for (int k = 0; k < 50; ++k) {
        ClickMatrix a = sample_click_matrix(plain, 21, static_cast<std::uint64_t>(k));
        ClickMatrix b = sample_click_matrix(with, 21, static_cast<std::uint64_t>(k));
        CHECK(a.probs == b.probs);
        CHECK_FALSE(b.has_benefits());
    }
}

TEST_CASE("always-on reserve attaches uniform negative benefits") {
    TypeDistribution d = polytope(2, 2);
    d.reserve = ReservePolicy{0.75, 0.0};
    ClickMatrix cm = sample_click_matrix(d, 22, 0);
    REQUIRE(cm.has_benefits());
    for (int i = 0; i < 2; ++i)
        for (int l = 0; l < 2; ++l) CHECK(cm.q(i, l) == -0.75);
}

TEST_CASE("invalid sampling inputs are rejected") {
    CHECK_THROWS_AS(estimate_ctr(polytope(2, 2), BidProfile::flat({1.0, 1.0}), 0, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(estimate_ctr(polytope(2, 2), BidProfile::flat({1.0}), 10, 1),
                    std::invalid_argument);

    TypeDistribution bad = product({0.25, 0.5}, {{true, 1.0, 0, 0}});
    CHECK_THROWS_AS(sample_click_matrix(bad, 1, 0), std::invalid_argument);

    TypeDistribution over = product({0.9}, {{true, 2.0, 0, 0}});
    CHECK_THROWS_AS(sample_click_matrix(over, 1, 0), std::invalid_argument);

    TypeDistribution mix = two_atom_mixture();
    mix.atoms[0].weight = 0.5;
    CHECK_THROWS_AS(sample_click_matrix(mix, 1, 0), std::invalid_argument);

    CHECK_THROWS_AS(monotonicity_probe(polytope(2, 1), BidProfile::flat({1.0, 1.0}),
                                       0, {}, 10, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(monotonicity_probe(polytope(2, 1), BidProfile::flat({1.0, 1.0}),
                                       0, {0.5, 0.5}, 10, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(monotonicity_probe(polytope(2, 1), BidProfile::flat({1.0, 0.0}),
                                       0, {0.5, 1.0}, 10, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(exact_ctr(polytope(2, 1), BidProfile::flat({1.0, 1.0})),
                    std::invalid_argument);
}
