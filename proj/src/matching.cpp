#include "adsim/matching.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

namespace adsim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Shared tolerance scale for tie comparisons: relative to the objective, never
// below an absolute floor.
double tie_scale(double objective) { return std::max(1.0, std::abs(objective)); }
constexpr double kTieRel = 1e-9;

void check_bids(const ClickMatrix& cm, const std::vector<double>& bids) {
    if (static_cast<int>(bids.size()) != cm.n_ads)
        throw std::invalid_argument("bids size does not match advert count");
    for (double b : bids) {
        if (!std::isfinite(b) || b < 0.0)
            throw std::invalid_argument("bids must be finite and nonnegative");
    }
}

// Pair weight; pairs with nonpositive weight or zero bid never enter a matching.
inline double pair_weight(const ClickMatrix& cm, const std::vector<double>& bids,
                          int i, int l) {
    return bids[i] * cm.p(i, l) + cm.q(i, l);
}
inline bool eligible(const ClickMatrix& cm, const std::vector<double>& bids,
                     int i, int l) {
    return bids[i] > 0.0 && pair_weight(cm, bids, i, l) > 0.0;
}

// Objective recomputed the same way everywhere (ascending advertiser order) so
// equal matchings produce bit-identical sums.
double canonical_objective(const ClickMatrix& cm, const std::vector<double>& bids,
                           const std::vector<int>& slot_of) {
    double a = 0.0;
    for (int i = 0; i < cm.n_ads; ++i)
        if (slot_of[i] >= 0) a += pair_weight(cm, bids, i, slot_of[i]);
    return a;
}

// Augmenting-path solver for the maximum-weight assignment, run on the real
// slots plus one parking column per row (weight zero) so "unassigned" is a
// first-class outcome. Maintains covering duals: s[i] + nu[l] >= W(i,l) with
// equality on matched pairs. Parking keeps every dual nonnegative: a row can
// always fall back to a free zero column, which pins s[i] >= 0, and column
// potentials only ever grow from zero.
struct JvWorkspace {
    std::vector<double> w;        // rows x cols
    std::vector<double> s, nu, dist;
    std::vector<int> pred, match_row, match_col;
    std::vector<char> popped, skip;
};

struct JvResult {
    int rows = 0, real_cols = 0, cols = 0;
};

thread_local JvWorkspace tls_jv;

// active_row / active_col: nullptr means all active. Used by the tie refinement
// to solve sub-instances without copying the weight matrix.
void jv_solve(JvWorkspace& ws, int rows, int real_cols,
              const std::vector<char>* active_row, const std::vector<char>* active_col) {
    const int cols = real_cols + rows;  // parking columns at real_cols..cols-1
    ws.s.assign(rows, 0.0);
    ws.nu.assign(cols, 0.0);
    ws.match_row.assign(rows, -1);
    ws.match_col.assign(cols, -1);
    ws.dist.assign(cols, 0.0);
    ws.pred.assign(cols, -1);
    ws.popped.assign(cols, 0);
    ws.skip.assign(rows, 0);

    auto weight = [&](int r, int c) -> double {
        if (c >= real_cols) return 0.0;
        if (active_col && !(*active_col)[c]) return -kInf;  // column removed
        return ws.w[static_cast<size_t>(r) * real_cols + c];
    };

    for (int r = 0; r < rows; ++r) {
        if (active_row && !(*active_row)[r]) { ws.skip[r] = 1; continue; }
        double mx = 0.0;
        for (int c = 0; c < real_cols; ++c) mx = std::max(mx, weight(r, c));
        ws.s[r] = mx;
        if (mx <= 0.0) ws.skip[r] = 1;  // nothing positive: stays unassigned
    }

    for (int r0 = 0; r0 < rows; ++r0) {
        if (ws.skip[r0]) continue;
        for (int c = 0; c < cols; ++c) {
            ws.dist[c] = ws.s[r0] + ws.nu[c] - weight(r0, c);
            ws.pred[c] = -1;
            ws.popped[c] = 0;
        }
        int terminal = -1;
        double dstar = 0.0;
        for (;;) {
            int cbest = -1;
            double dbest = kInf;
            for (int c = 0; c < cols; ++c)
                if (!ws.popped[c] && ws.dist[c] < dbest) { dbest = ws.dist[c]; cbest = c; }
            if (ws.match_col[cbest] < 0) { terminal = cbest; dstar = dbest; break; }
            ws.popped[cbest] = 1;
            int r = ws.match_col[cbest];
            for (int c = 0; c < cols; ++c) {
                if (ws.popped[c]) continue;
                double nd = dbest + (ws.s[r] + ws.nu[c] - weight(r, c));
                if (nd < ws.dist[c]) { ws.dist[c] = nd; ws.pred[c] = cbest; }
            }
        }
        for (int c = 0; c < cols; ++c) {
            if (!ws.popped[c]) continue;
            double d = dstar - ws.dist[c];
            ws.nu[c] += d;
            ws.s[ws.match_col[c]] -= d;
        }
        ws.s[r0] -= dstar;
        int c = terminal;
        while (c >= 0) {
            int cp = ws.pred[c];
            int r = (cp < 0) ? r0 : ws.match_col[cp];
            ws.match_col[c] = r;
            ws.match_row[r] = c;
            c = cp;
        }
    }
}

void load_weights(JvWorkspace& ws, const ClickMatrix& cm, const std::vector<double>& bids) {
    const int rows = cm.n_ads, cols = cm.n_slots;
    ws.w.assign(static_cast<size_t>(rows) * cols, 0.0);
    for (int i = 0; i < rows; ++i)
        for (int l = 0; l < cols; ++l)
            if (eligible(cm, bids, i, l))
                ws.w[static_cast<size_t>(i) * cols + l] = pair_weight(cm, bids, i, l);
}

// Ineligible pairs carry stored weight zero, so the solver may park a row on a
// real column it must not occupy; only positive stored weights count as real
// assignments.
std::vector<int> jv_slot_of(const JvWorkspace& ws, int rows, int real_cols) {
    std::vector<int> slot_of(rows, -1);
    for (int r = 0; r < rows; ++r) {
        int c = ws.match_row[r];
        if (c >= 0 && c < real_cols &&
            ws.w[static_cast<size_t>(r) * real_cols + c] > 0.0)
            slot_of[r] = c;
    }
    return slot_of;
}

// Optimal value of the sub-instance restricted to the active rows/columns.
double jv_value(JvWorkspace& ws, const ClickMatrix& cm, const std::vector<double>& bids,
                int rows, int real_cols,
                const std::vector<char>& active_row, const std::vector<char>& active_col) {
    jv_solve(ws, rows, real_cols, &active_row, &active_col);
    double a = 0.0;
    for (int r = 0; r < rows; ++r) {
        int c = ws.match_row[r];
        if (active_row[r] && c >= 0 && c < real_cols &&
            ws.w[static_cast<size_t>(r) * real_cols + c] > 0.0)
            a += pair_weight(cm, bids, r, c);
    }
    return a;
}

// True when another matching could tie the found optimum within the tie
// tolerance: some unmatched eligible pair is nearly tight, or some matched
// pair contributes nearly nothing.
bool tie_possible(const JvWorkspace& ws, const ClickMatrix& cm,
                  const std::vector<double>& bids, double tol) {
    for (int i = 0; i < cm.n_ads; ++i) {
        int c = ws.match_row[i];
        if (c >= 0 && c < cm.n_slots &&
            ws.w[static_cast<size_t>(i) * cm.n_slots + c] <= tol) return true;
        for (int l = 0; l < cm.n_slots; ++l) {
            if (ws.match_row[i] == l) continue;
            if (!eligible(cm, bids, i, l)) continue;
            double slack = ws.s[i] + ws.nu[l] - pair_weight(cm, bids, i, l);
            if (slack <= tol) return true;
        }
    }
    return false;
}

// Lexicographic resolution of ties: advertisers in index order each take the
// lowest slot (unassigned last) that still completes to the optimal value.
std::vector<int> refine_ties(JvWorkspace& ws, const ClickMatrix& cm,
                             const std::vector<double>& bids, double target, double tol) {
    const int rows = cm.n_ads, real_cols = cm.n_slots;
    std::vector<int> slot_of(rows, -1);
    std::vector<char> row_left(rows, 1), col_left(real_cols, 1);
    double fixed = 0.0;
    for (int i = 0; i < rows; ++i) {
        row_left[i] = 0;
        int chosen = -1;
        for (int l = 0; l < real_cols; ++l) {
            if (!col_left[l] || !eligible(cm, bids, i, l)) continue;
            col_left[l] = 0;
            double rest = jv_value(ws, cm, bids, rows, real_cols, row_left, col_left);
            double cand = pair_weight(cm, bids, i, l);
            if (fixed + cand + rest >= target - tol) { chosen = l; fixed += cand; break; }
            col_left[l] = 1;
        }
        slot_of[i] = chosen;  // -1 means unassigned, which always completes
    }
    return slot_of;
}

} // namespace

void ClickMatrix::validate() const {
    if (n_ads < 0 || n_slots < 0)
        throw std::invalid_argument("negative dimensions");
    if (probs.size() != static_cast<size_t>(n_ads) * n_slots)
        throw std::invalid_argument("probs size does not match dimensions");
    if (!benefits.empty() && benefits.size() != probs.size())
        throw std::invalid_argument("benefits size does not match dimensions");
    for (double v : probs)
        if (!std::isfinite(v) || v < 0.0 || v > 1.0)
            throw std::invalid_argument("click probabilities must lie in [0,1]");
    for (double v : benefits)
        if (!std::isfinite(v))
            throw std::invalid_argument("benefits must be finite");
}

Matching solve_assignment(const ClickMatrix& cm, const std::vector<double>& bids) {
    cm.validate();
    check_bids(cm, bids);
    JvWorkspace& ws = tls_jv;
    load_weights(ws, cm, bids);
    jv_solve(ws, cm.n_ads, cm.n_slots, nullptr, nullptr);

    Matching m;
    m.slot_of = jv_slot_of(ws, cm.n_ads, cm.n_slots);
    m.objective = canonical_objective(cm, bids, m.slot_of);
    double tol = kTieRel * tie_scale(m.objective);
    if (tie_possible(ws, cm, bids, tol)) {
        // Sub-solves overwrite the workspace matching, so refine from a copy of
        // the weight matrix already loaded; weights themselves are untouched.
        std::vector<int> refined = refine_ties(ws, cm, bids, m.objective, tol);
        m.slot_of = std::move(refined);
        m.objective = canonical_objective(cm, bids, m.slot_of);
    }
    m.ctr.assign(cm.n_ads, 0.0);
    for (int i = 0; i < cm.n_ads; ++i)
        if (m.slot_of[i] >= 0) m.ctr[i] = cm.p(i, m.slot_of[i]);
    return m;
}

Matching enumerate_matchings(const ClickMatrix& cm, const std::vector<double>& bids) {
    cm.validate();
    check_bids(cm, bids);
    if (cm.n_ads > 8 || cm.n_slots > 8)
        throw std::invalid_argument("instance too large to enumerate");

    std::vector<int> slot_of(cm.n_ads, -1);
    // Pass 1: exact maximum of the canonical objective.
    double best_val = 0.0;
    auto pass1 = [&](auto&& self, int i, std::uint32_t used, double acc) -> void {
        if (i == cm.n_ads) { best_val = std::max(best_val, acc); return; }
        self(self, i + 1, used, acc);
        for (int l = 0; l < cm.n_slots; ++l) {
            if (used & (1u << l)) continue;
            if (!eligible(cm, bids, i, l)) continue;
            self(self, i + 1, used | (1u << l), acc + pair_weight(cm, bids, i, l));
        }
    };
    pass1(pass1, 0, 0u, 0.0);

    // Pass 2: lexicographically smallest slot vector among near-optimal ones.
    double tol = kTieRel * tie_scale(best_val);
    std::vector<int> best_slots;
    std::vector<int> cur(cm.n_ads, -1);
    auto lex_less = [&](const std::vector<int>& a, const std::vector<int>& b) {
        for (size_t k = 0; k < a.size(); ++k) {
            int av = a[k] < 0 ? std::numeric_limits<int>::max() : a[k];
            int bv = b[k] < 0 ? std::numeric_limits<int>::max() : b[k];
            if (av != bv) return av < bv;
        }
        return false;
    };
    auto pass2 = [&](auto&& self, int i, std::uint32_t used, double acc) -> void {
        if (i == cm.n_ads) {
            if (acc >= best_val - tol &&
                (best_slots.empty() || lex_less(cur, best_slots)))
                best_slots = cur;
            return;
        }
        cur[i] = -1;
        self(self, i + 1, used, acc);
        for (int l = 0; l < cm.n_slots; ++l) {
            if (used & (1u << l)) continue;
            if (!eligible(cm, bids, i, l)) continue;
            cur[i] = l;
            self(self, i + 1, used | (1u << l), acc + pair_weight(cm, bids, i, l));
        }
        cur[i] = -1;
    };
    pass2(pass2, 0, 0u, 0.0);
    if (best_slots.empty()) best_slots.assign(cm.n_ads, -1);

    Matching m;
    m.slot_of = std::move(best_slots);
    m.objective = canonical_objective(cm, bids, m.slot_of);
    m.ctr.assign(cm.n_ads, 0.0);
    for (int i = 0; i < cm.n_ads; ++i)
        if (m.slot_of[i] >= 0) m.ctr[i] = cm.p(i, m.slot_of[i]);
    return m;
}

DualPrices solve_dual(const ClickMatrix& cm, const std::vector<double>& bids,
                      const Matching& m) {
    cm.validate();
    check_bids(cm, bids);
    if (cm.has_benefits())
        for (double q : cm.benefits)
            if (q != 0.0)
                throw std::invalid_argument("dual prices require zero benefits");
    if (static_cast<int>(m.slot_of.size()) != cm.n_ads)
        throw std::invalid_argument("matching does not fit instance");

    const int I = cm.n_ads, L = cm.n_slots;
    JvWorkspace& ws = tls_jv;
    load_weights(ws, cm, bids);
    jv_solve(ws, I, L, nullptr, nullptr);

    std::vector<double> s(ws.s.begin(), ws.s.begin() + I);
    std::vector<double> v(ws.nu.begin(), ws.nu.begin() + L);
    for (double& x : s) x = std::max(x, 0.0);
    for (double& x : v) x = std::max(x, 0.0);

    double scale = tie_scale(m.objective);
    const double eps_tight = 1e-9 * scale;
    const double eps_zero = 1e-12 * scale;
    auto slack = [&](int i, int l) {
        return s[i] + v[l] - bids[i] * cm.p(i, l);
    };

    // Push slot prices down toward the buyer-optimal corner: money moves from a
    // set of slots to the advertisers currently holding them, growing the set
    // whenever an outside advertiser's constraint is already tight. A slot is
    // stuck at its current price once the closure reaches an unassigned
    // advertiser (whose surplus must stay zero).
    std::vector<int> occupant(L, -1);
    for (int i = 0; i < I; ++i)
        if (m.slot_of[i] >= 0) occupant[m.slot_of[i]] = i;

    int guard = 10 * (I + L) * (I + L) + 10;
    bool progress = true;
    while (progress && guard-- > 0) {
        progress = false;
        for (int l0 = 0; l0 < L; ++l0) {
            if (v[l0] <= eps_zero) continue;
            std::vector<char> in_s(L, 0), in_t(I, 0);
            std::vector<int> queue{l0};
            in_s[l0] = 1;
            bool blocked = false;
            while (!queue.empty() && !blocked) {
                int k = queue.back();
                queue.pop_back();
                if (occupant[k] < 0) { blocked = true; break; }
                in_t[occupant[k]] = 1;
                for (int j = 0; j < I && !blocked; ++j) {
                    if (in_t[j]) continue;
                    bool tight = false;
                    for (int kk = 0; kk < L; ++kk)
                        if (in_s[kk] && slack(j, kk) <= eps_tight) { tight = true; break; }
                    if (!tight) continue;
                    if (m.slot_of[j] < 0) { blocked = true; break; }
                    in_t[j] = 1;
                    int ks = m.slot_of[j];
                    if (!in_s[ks]) { in_s[ks] = 1; queue.push_back(ks); }
                }
                // Re-scan after growth: membership changes can tighten edges
                // into the enlarged set.
                for (int kk = 0; kk < L; ++kk)
                    if (in_s[kk] && occupant[kk] >= 0 && !in_t[occupant[kk]])
                        queue.push_back(kk);
            }
            if (blocked) continue;
            double delta = kInf;
            for (int k = 0; k < L; ++k)
                if (in_s[k]) delta = std::min(delta, v[k]);
            for (int j = 0; j < I; ++j) {
                if (in_t[j]) continue;
                for (int k = 0; k < L; ++k)
                    if (in_s[k]) delta = std::min(delta, slack(j, k));
            }
            if (delta <= eps_zero || !std::isfinite(delta)) continue;
            for (int k = 0; k < L; ++k)
                if (in_s[k]) v[k] -= delta;
            for (int j = 0; j < I; ++j)
                if (in_t[j]) s[j] += delta;
            progress = true;
        }
    }

    for (double& x : s) if (x > -eps_tight && x < 0.0) x = 0.0;
    for (double& x : v) if (x > -eps_tight && x < 0.0) x = 0.0;

    // Certify before returning: cover all pairs, split the optimum exactly.
    double sum = 0.0;
    for (double x : s) { if (x < 0.0) throw std::runtime_error("negative surplus in dual"); sum += x; }
    for (double x : v) { if (x < 0.0) throw std::runtime_error("negative slot price in dual"); sum += x; }
    if (std::abs(sum - m.objective) > 1e-7 * scale)
        throw std::runtime_error("dual total does not match assignment value");
    for (int i = 0; i < I; ++i)
        for (int l = 0; l < L; ++l)
            if (slack(i, l) < -1e-7 * scale)
                throw std::runtime_error("dual constraint violated");

    return DualPrices{std::move(s), std::move(v)};
}

LayoutChoice solve_layout_auction(const std::vector<Layout>& layouts,
                                  const std::vector<double>& bids) {
    if (layouts.empty()) throw std::invalid_argument("no layouts");
    for (double b : bids)
        if (!std::isfinite(b) || b < 0.0)
            throw std::invalid_argument("bids must be finite and nonnegative");
    int best = -1;
    double best_obj = -kInf;
    for (int k = 0; k < static_cast<int>(layouts.size()); ++k) {
        const Layout& lay = layouts[k];
        if (lay.ctr_of.size() != bids.size())
            throw std::invalid_argument("layout ctr size does not match bids");
        double obj = 0.0;
        for (size_t i = 0; i < bids.size(); ++i) obj += bids[i] * lay.ctr_of[i];
        bool better = obj > best_obj ||
                      (obj == best_obj && best >= 0 && lay.id < layouts[best].id);
        if (best < 0 || better) { best = k; best_obj = obj; }
    }
    LayoutChoice choice;
    choice.layout_index = best;
    choice.objective = best_obj;
    choice.ctr = layouts[best].ctr_of;
    for (size_t i = 0; i < bids.size(); ++i)
        if (bids[i] <= 0.0) choice.ctr[i] = 0.0;
    return choice;
}

ImageTextChoice solve_image_text(const ClickMatrix& text_cm,
                                 const std::vector<double>& text_bids,
                                 const std::vector<double>& image_ctr,
                                 const std::vector<double>& image_bids) {
    if (image_ctr.size() != image_bids.size())
        throw std::invalid_argument("image ctr/bids size mismatch");
    ImageTextChoice out;
    out.text = solve_assignment(text_cm, text_bids);
    out.objective = out.text.objective;
    for (int k = 0; k < static_cast<int>(image_ctr.size()); ++k) {
        if (!(image_ctr[k] >= 0.0 && image_ctr[k] <= 1.0))
            throw std::invalid_argument("image ctr outside [0,1]");
        double obj = image_bids[k] * image_ctr[k];
        if (image_bids[k] > 0.0 && obj > out.objective) {
            out.objective = obj;
            out.image_chosen = true;
            out.image_index = k;
        }
    }
    return out;
}

} // namespace adsim
