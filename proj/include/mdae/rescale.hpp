#pragma once
// Rescaling offsets: impulse orders of variables and equations, their least
// solution and the goodness conditions.

#include "mdae/expr.hpp"
#include "mdae/mcarray.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace mdae {

inline constexpr int kInf = std::numeric_limits<int>::max() / 4;

inline int sat_add(int a, int b) {
    if (a >= kInf || b >= kInf) return kInf;
    long long s = (long long)a + b;
    return s >= kInf ? kInf : int(s);
}
inline int sat_mul(int k, int a) {
    if (a >= kInf) return a == 0 ? 0 : kInf;
    long long s = (long long)k * a;
    return s >= kInf ? kInf : int(s);
}

using Offsets = std::map<VarKey, int>;

inline int offset_of(const Offsets& mu, const VarKey& v) {
    auto it = mu.find(v);
    return it == mu.end() ? 0 : it->second;
}

// n + sum mult*mu(var) + sum over opaque factors (0 if all their argument
// offsets vanish, infinite otherwise).
inline int score(const MonomialTerm& t, const Offsets& mu) {
    int s = t.n;
    for (const auto& [v, p] : t.vars) s = sat_add(s, sat_mul(p, offset_of(mu, v)));
    for (const auto& o : t.opaque)
        for (const auto& v : o.args)
            if (offset_of(mu, v) != 0) return kInf;
    return s;
}

// Offset of an expression: maximum over its monomials; nullopt for 0.
inline std::optional<int> expr_offset(const MonomialForm& f, const Offsets& mu) {
    std::optional<int> r;
    for (const auto& t : f.terms) {
        int s = score(t, mu);
        if (!r || s > *r) r = s;
    }
    return r;
}
inline std::optional<int> expr_offset(const Expr& e, const Offsets& mu) { return expr_offset(monomial_decompose(e), mu); }

// One max-equation: the terms containing x dominate all the others.
struct OffsetConstraint {
    std::string name;
    VarKey x;
    MonomialForm form;
};

struct RescalingConstraints {
    std::vector<OffsetConstraint> rows;
    std::set<VarKey> pinned;     // offset fixed to 0 (past variables)
    std::set<VarKey> variables;  // all unknown offsets
};

inline RescalingConstraints build_rescaling_system(const ModeChangeArray& a, const ArrayMatching& m) {
    RescalingConstraints c;
    c.pinned = a.past;
    c.variables = a.dependent;
    for (size_t r = 0; r < a.eqs.size(); ++r)
        if (m.row_var[r]) c.rows.push_back({a.eqs[r].name, *m.row_var[r], monomial_decompose(a.eqs[r].expr)});
    return c;
}

struct ConstraintCheck {
    int matched = 0;  // max score over terms containing x
    int rest = 0;     // max score over the other terms
    bool has_rest = false;
    bool ok() const { return !has_rest || matched >= rest; }
};

inline ConstraintCheck check_constraint(const OffsetConstraint& c, const Offsets& mu) {
    ConstraintCheck r;
    r.matched = std::numeric_limits<int>::min();
    for (const auto& t : c.form.terms) {
        int s = score(t, mu);
        if (t.contains(c.x)) {
            r.matched = std::max(r.matched, s);
        } else {
            r.rest = r.has_rest ? std::max(r.rest, s) : s;
            r.has_rest = true;
        }
    }
    return r;
}

// Smallest offset of x making some term of T_x reach `target`.
inline int required_offset(const OffsetConstraint& c, const Offsets& mu, int target) {
    if (target >= kInf) return kInf;
    int best = kInf;
    for (const auto& t : c.form.terms) {
        if (!t.contains(c.x)) continue;
        int mult = t.multiplicity(c.x);
        Offsets without = mu;
        without[c.x] = 0;
        int base = score(t, without);
        if (t.opaque_depends_on(c.x)) {
            // x inside an opaque factor: any positive offset makes the term infinite
            if (base >= target) return offset_of(mu, c.x);
            best = std::min(best, std::max(1, offset_of(mu, c.x)));
            continue;
        }
        if (base >= kInf) return offset_of(mu, c.x);
        if (mult == 0) continue;
        int need = target - base;
        int v = need <= 0 ? 0 : (need + mult - 1) / mult;
        best = std::min(best, v);
    }
    return best;
}

inline bool satisfies_all(const RescalingConstraints& c, const Offsets& mu) {
    for (const auto& row : c.rows)
        if (!c.pinned.count(row.x) && !check_constraint(row, mu).ok()) return false;
    return true;
}

// When x-terms carry other variables the system is not monotone and the
// iteration may stop above a minimal point, or mark a whole cycle infinite
// when only part of it has to be. Lower each offset to its smallest feasible
// value until nothing moves. Finite candidates for infinite offsets are
// bounded by a longest-path estimate. No-op on monotone systems.
inline void descend_offsets(const RescalingConstraints& c, Offsets& mu) {
    if (!satisfies_all(c, mu)) return;
    int bound = 1;
    for (const auto& row : c.rows) {
        int top = 0;
        for (const auto& t : row.form.terms) top = std::max(top, std::abs(t.n));
        bound += top;
    }
    for (const auto& [v, x] : mu)
        if (x < kInf) bound = std::max(bound, x + 1);
    for (bool moved = true; moved;) {
        moved = false;
        for (auto& [v, x] : mu) {
            if (c.pinned.count(v) || x == 0) continue;
            const int cur = x;
            for (int t = 0; t < std::min(cur, bound + 1); ++t) {
                x = t;
                if (satisfies_all(c, mu)) break;
                x = cur;
            }
            moved |= x != cur;
        }
    }
}

// Least solution by monotone iteration from zero. Offsets that keep growing
// past a full round per variable lie on a positive cycle and become infinite.
inline Offsets solve_min_offsets(const RescalingConstraints& c) {
    Offsets mu;
    for (const auto& v : c.variables) mu[v] = 0;
    for (const auto& v : c.pinned) mu[v] = 0;
    const int n = int(mu.size()) + 1;
    int quiet_rounds = 0;
    for (int guard = 0; guard < 100000; ++guard) {
        std::set<VarKey> changed;
        for (const auto& row : c.rows) {
            if (c.pinned.count(row.x)) continue;
            auto chk = check_constraint(row, mu);
            if (chk.ok()) continue;
            int need = required_offset(row, mu, chk.rest);
            int& cur = mu[row.x];
            if (need > cur) {
                cur = need;
                changed.insert(row.x);
            }
        }
        if (changed.empty()) break;
        if (++quiet_rounds > n) {
            for (const auto& v : changed) mu[v] = kInf;
            quiet_rounds = 0;
        }
    }
    descend_offsets(c, mu);
    return mu;
}

// Difference-bound matrix over nodes 0..n-1: D[i][j] bounds mu_i - mu_j.
struct DBM {
    static constexpr long long kNone = std::numeric_limits<long long>::max() / 4;
    int n = 0;
    std::vector<std::vector<long long>> D;

    explicit DBM(int nodes) : n(nodes), D(nodes, std::vector<long long>(nodes, kNone)) {
        for (int i = 0; i < n; ++i) D[i][i] = 0;
    }
    void constrain(int i, int j, long long bound) { D[i][j] = std::min(D[i][j], bound); }
    void close() {
        for (int k = 0; k < n; ++k)
            for (int i = 0; i < n; ++i) {
                if (D[i][k] >= kNone) continue;
                for (int j = 0; j < n; ++j)
                    if (D[k][j] < kNone) D[i][j] = std::min(D[i][j], D[i][k] + D[k][j]);
            }
    }
    bool feasible() const {
        for (int i = 0; i < n; ++i)
            if (D[i][i] < 0) return false;
        return true;
    }
};

// Least nonnegative solution of mu_i >= mu_j + w for the given edges, with
// node 0 the zero reference. Nodes on or after a positive cycle are infinite.
inline std::vector<int> least_difference_solution(int n, const std::vector<std::tuple<int, int, int>>& edges) {
    DBM dbm(n);
    for (auto [i, j, w] : edges) dbm.constrain(j, i, -w);  // mu_j - mu_i <= -w
    for (int i = 1; i < n; ++i) dbm.constrain(0, i, 0);     // mu_i >= 0
    dbm.close();
    std::vector<int> mu(n, 0);
    for (int i = 1; i < n; ++i) {
        bool inf = false;
        for (int k = 0; k < n; ++k)
            if (dbm.D[k][k] < 0 && dbm.D[k][i] < DBM::kNone) inf = true;
        mu[i] = inf ? kInf : int(-dbm.D[0][i]);
    }
    return mu;
}

// ---------------------------------------------------------------------------
// goodness

struct RescalingSolution {
    Offsets mu;                         // variable offsets
    std::vector<std::optional<int>> mu_eq;  // per array row, matched rows only
    bool verified = true;               // equality holds on every matched row
    bool g37 = true, g38 = true, g39 = true;
    std::vector<std::string> w37;       // rows with infinite offset
    std::vector<VarKey> w38, w39;

    bool good() const { return verified && g37 && g38 && g39; }
};

inline RescalingSolution check_goodness(const ModeChangeArray& a, const ArrayMatching& m, const Offsets& mu) {
    RescalingSolution s;
    s.mu = mu;
    s.mu_eq.assign(a.eqs.size(), std::nullopt);
    for (size_t r = 0; r < a.eqs.size(); ++r) {
        if (!m.row_var[r]) continue;
        OffsetConstraint c{a.eqs[r].name, *m.row_var[r], monomial_decompose(a.eqs[r].expr)};
        auto chk = check_constraint(c, mu);
        s.mu_eq[r] = chk.matched;
        if (!chk.ok()) s.verified = false;
        if (chk.matched >= kInf) {
            s.g37 = false;
            s.w37.push_back(a.eqs[r].name);
        }
    }
    for (const auto& v : a.tail_vars)
        if (offset_of(mu, v) != 0) {
            s.g38 = false;
            s.w38.push_back(v);
        }
    for (const auto& v : a.dependent) {
        if (a.tail_vars.count(v)) continue;
        int u = offset_of(mu, v);
        if (u >= kInf) continue;  // reported through (37)
        int n = std::min(u, v.m);
        if (!a.vars.count(var_key(v.base, v.m - n, v.k + n))) {
            s.g39 = false;
            s.w39.push_back(v);
        }
    }
    return s;
}

// Canonical matching and offsets, relinking impulsive class members until
// the Euler trees no longer change.
struct MatchedRescaling {
    ArrayMatching matching;
    RescalingSolution solution;
    int rounds = 0;
};

inline MatchedRescaling match_and_rescale(const ModeChangeArray& a) {
    MatchedRescaling r;
    ArrayMatching m = canonical_matching(a);
    Offsets mu = solve_min_offsets(build_rescaling_system(a, m));
    for (r.rounds = 1; r.rounds < 8; ++r.rounds) {
        ArrayMatching next = canonical_matching(a, &mu);
        if (next.row_var == m.row_var) break;
        m = std::move(next);
        mu = solve_min_offsets(build_rescaling_system(a, m));
    }
    r.matching = std::move(m);
    r.solution = check_goodness(a, r.matching, mu);
    return r;
}

}  // namespace mdae
