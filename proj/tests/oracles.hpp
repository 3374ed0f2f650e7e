#pragma once

// Test-only oracles, independent of the library's production algorithms.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "adsim/instance.hpp"
#include "adsim/matching.hpp"

namespace oracles {

// Solves a dense linear system in place; returns false when near-singular.
inline bool gauss_solve(std::vector<double> a, std::vector<double> b, int n,
                        std::vector<double>& x) {
    for (int c = 0; c < n; ++c) {
        int piv = c;
        for (int r = c + 1; r < n; ++r)
            if (std::abs(a[r * n + c]) > std::abs(a[piv * n + c])) piv = r;
        if (std::abs(a[piv * n + c]) < 1e-11) return false;
        for (int k = 0; k < n; ++k) std::swap(a[c * n + k], a[piv * n + k]);
        std::swap(b[c], b[piv]);
        for (int r = c + 1; r < n; ++r) {
            double f = a[r * n + c] / a[c * n + c];
            for (int k = c; k < n; ++k) a[r * n + k] -= f * a[c * n + k];
            b[r] -= f * b[c];
        }
    }
    x.assign(n, 0.0);
    for (int r = n - 1; r >= 0; --r) {
        double acc = b[r];
        for (int k = r + 1; k < n; ++k) acc -= a[r * n + k] * x[k];
        x[r] = acc / a[r * n + r];
    }
    return true;
}

// Minimal-total-slot-price dual found by brute-force vertex enumeration of the
// optimal dual face, parametrized by the prices of matched slots. Every dual
// with the correct total is tight on the optimal matching's pairs and zero on
// unmatched advertisers and slots, so the face lives in that low-dimensional
// coordinate system. Requires zero benefits.
struct DualOracle {
    std::vector<double> ad_surplus, slot_price;
    double total_slot_price = 0.0;
    bool found = false;
};

inline DualOracle min_dual_by_vertex_enumeration(const adsim::ClickMatrix& cm,
                                                 const std::vector<double>& bids) {
    using adsim::Matching;
    const int I = cm.n_ads, L = cm.n_slots;
    Matching m = adsim::enumerate_matchings(cm, bids);
    auto w = [&](int i, int l) { return bids[i] * cm.p(i, l); };

    std::vector<int> vars;  // matched slots, variable order
    std::vector<int> var_of_slot(L, -1);
    for (int i = 0; i < I; ++i)
        if (m.slot_of[i] >= 0) {
            var_of_slot[m.slot_of[i]] = static_cast<int>(vars.size());
            vars.push_back(m.slot_of[i]);
        }
    const int n = static_cast<int>(vars.size());

    double scale = 1.0;
    for (int i = 0; i < I; ++i)
        for (int l = 0; l < L; ++l) scale = std::max(scale, std::abs(w(i, l)));
    const double tol = 1e-9 * scale;

    // Constraint rows: coef . v >= rhs.
    std::vector<std::vector<double>> coef;
    std::vector<double> rhs;
    auto add = [&](std::vector<double> c, double r) {
        coef.push_back(std::move(c));
        rhs.push_back(r);
    };
    for (int t = 0; t < n; ++t) {
        std::vector<double> lo(n, 0.0), hi(n, 0.0);
        lo[t] = 1.0;
        add(lo, 0.0);  // v >= 0
        int slot = vars[t];
        int occ = -1;
        for (int i = 0; i < I; ++i)
            if (m.slot_of[i] == slot) occ = i;
        hi[t] = -1.0;
        add(hi, -w(occ, slot));  // occupant surplus >= 0  <=>  -v >= -w
    }
    for (int j = 0; j < I; ++j) {
        for (int k = 0; k < L; ++k) {
            std::vector<double> c(n, 0.0);
            double r = w(j, k);
            if (m.slot_of[j] >= 0) {
                // s_j = w(j, m(j)) - v_{m(j)}
                c[var_of_slot[m.slot_of[j]]] -= 1.0;
                r -= w(j, m.slot_of[j]);
            }
            if (var_of_slot[k] >= 0) c[var_of_slot[k]] += 1.0;
            bool all_zero = true;
            for (double x : c) all_zero &= (x == 0.0);
            if (all_zero) continue;  // vacuous (holds because m is optimal)
            add(std::move(c), r);
        }
    }

    DualOracle out;
    const int C = static_cast<int>(coef.size());
    std::vector<int> pick(n, 0);
    std::vector<double> v;
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> best_v;

    auto try_subset = [&](const std::vector<int>& sel) {
        std::vector<double> a(n * n), b(n);
        for (int r = 0; r < n; ++r) {
            for (int c = 0; c < n; ++c) a[r * n + c] = coef[sel[r]][c];
            b[r] = rhs[sel[r]];
        }
        if (!gauss_solve(a, b, n, v)) return;
        for (int r = 0; r < C; ++r) {
            double acc = -rhs[r];
            for (int c = 0; c < n; ++c) acc += coef[r][c] * v[c];
            if (acc < -tol) return;  // infeasible vertex
        }
        double total = 0.0;
        for (double x : v) total += x;
        if (total < best) { best = total; best_v = v; }
    };

    if (n == 0) {
        out.found = true;
    } else {
        std::vector<int> sel(n);
        auto rec = [&](auto&& self, int start, int depth) -> void {
            if (depth == n) { try_subset(sel); return; }
            for (int c = start; c <= C - (n - depth); ++c) {
                sel[depth] = c;
                self(self, c + 1, depth + 1);
            }
        };
        rec(rec, 0, 0);
        if (!best_v.empty() || best < std::numeric_limits<double>::infinity())
            out.found = true;
    }

    out.slot_price.assign(L, 0.0);
    out.ad_surplus.assign(I, 0.0);
    out.total_slot_price = (n == 0) ? 0.0 : best;
    for (int t = 0; t < n; ++t) out.slot_price[vars[t]] = (n == 0) ? 0.0 : best_v[t];
    for (int i = 0; i < I; ++i)
        if (m.slot_of[i] >= 0)
            out.ad_surplus[i] = w(i, m.slot_of[i]) - out.slot_price[m.slot_of[i]];
    return out;
}

} // namespace oracles
