#pragma once
// Mode-change arrays: past variables, facts, heights, Euler closure and the
// canonical matching.

#include "mdae/error.hpp"
#include "mdae/expr.hpp"
#include "mdae/graph.hpp"
#include "mdae/model.hpp"
#include "mdae/sigma.hpp"

#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace mdae {

struct ModeChange {
    Symbols syms;
    std::string from, to;
    DAESystem prev, next;
    SigmaOffsets prev_sigma, next_sigma;
    std::optional<Expr> guard;
    std::vector<Expr> annotated_facts;
    std::map<int, int> prev_d;  // base -> variable offset in the previous mode
    std::map<int, int> next_d;  // base -> variable offset in the new mode

    bool is_past(const VarKey& v) const {
        if (v.role != Role::Plain) return false;
        auto it = prev_d.find(v.base);
        return it != prev_d.end() && v.total_degree() <= it->second - 1;
    }
    int matched_base(int f) const { return next.vars[next_sigma.match[f]]; }
};

inline ModeChange make_mode_change(const Model& m, const std::string& from, const std::string& to) {
    const Mode* a = m.mode(from);
    const Mode* b = m.mode(to);
    if (!a || !b) throw StructuralError(StructuralError::NoTransition, "unknown mode in " + from + " -> " + to);
    ModeChange mc;
    mc.syms = m.syms;
    mc.from = from;
    mc.to = to;
    mc.prev = a->system();
    mc.next = b->system();
    mc.prev_sigma = solve_sigma(mc.prev, m.syms);
    mc.next_sigma = solve_sigma(mc.next, m.syms);
    for (size_t j = 0; j < mc.prev.vars.size(); ++j) mc.prev_d[mc.prev.vars[j]] = mc.prev_sigma.d[j];
    for (size_t j = 0; j < mc.next.vars.size(); ++j) mc.next_d[mc.next.vars[j]] = mc.next_sigma.d[j];
    if (const Transition* t = m.transition(from, to)) {
        mc.guard = t->guard;
        mc.annotated_facts = t->facts;
    }
    return mc;
}

inline std::string row_name(const std::string& label, int m, int k) {
    std::string core = m == 0 ? label : m == 1 ? "der(" + label + ")" : "der(" + label + "," + std::to_string(m) + ")";
    return k == 0 ? core : "shift(" + core + "," + std::to_string(k) + ")";
}

// Cached f^(m).
class DerivativeCache {
public:
    explicit DerivativeCache(const DAESystem& s) : s_(s), d_(s.size()) {}
    const Expr& get(int f, int m) {
        auto& v = d_[f];
        if (v.empty()) v.push_back(s_.equations[f]);
        while (int(v.size()) <= m) v.push_back(differentiate(v.back()));
        return v[m];
    }

private:
    const DAESystem& s_;
    std::vector<std::vector<Expr>> d_;
};

// ---------------------------------------------------------------------------
// facts

inline int min_shift(const Expr& e) {
    int k = 1 << 20;
    for (const auto& v : variables(e)) k = std::min(k, v.k);
    return k;
}

// An equation is a fact when all its variables are past and it is, up to a
// constant factor, a forward shift of the zero-crossing or of an annotation.
inline bool is_fact(const ModeChange& mc, const Expr& e) {
    auto vs = variables(e);
    if (vs.empty()) return false;
    for (const auto& v : vs)
        if (!mc.is_past(v)) return false;
    auto matches = [&](const Expr& g) {
        if (g.is_zero()) return false;
        int j = min_shift(e) - min_shift(g);
        if (j < 0) return false;
        return equal_up_to_constant(e, shift(g, j)).has_value();
    };
    if (mc.guard && matches(*mc.guard)) return true;
    for (const auto& a : mc.annotated_facts)
        if (matches(a)) return true;
    return false;
}

// ---------------------------------------------------------------------------
// heights

struct Heights {
    std::vector<int> k_lower;    // K_* per new-mode equation
    std::vector<int> k_upper;    // K^* per new-mode equation
    std::vector<int> component;  // connected component of the new mode's graph
    std::vector<int> K;          // height used: component maximum of K^*
};

inline std::vector<int> equation_components(const DAESystem& s) {
    std::vector<int> parent(s.size());
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
    std::map<int, int> owner;
    for (int f = 0; f < s.size(); ++f)
        for (const auto& v : variables(s.equations[f])) {
            auto [it, fresh] = owner.emplace(v.base, f);
            if (!fresh) parent[find(f)] = find(it->second);
        }
    std::vector<int> comp(s.size());
    std::map<int, int> ids;
    for (int f = 0; f < s.size(); ++f) comp[f] = ids.emplace(find(f), int(ids.size())).first->second;
    return comp;
}

inline constexpr int kMaxHeight = 16;

inline Heights compute_height_bounds(const ModeChange& mc) {
    const DAESystem& s = mc.next;
    DerivativeCache dc(s);
    Heights h;
    h.k_lower.assign(s.size(), 0);
    h.k_upper.assign(s.size(), 0);
    for (int f = 0; f < s.size(); ++f) {
        const int c = mc.next_sigma.c[f];
        auto satisfies = [&](int K, bool upper) {
            for (int m = 0; m < c; ++m) {
                Expr g = shift(dc.get(f, m), K);
                if (is_fact(mc, g)) continue;
                if (K < c - m) return false;
                // candidate tail pairing variables of g
                bool meets_past = false, meets_dep = false;
                for (const auto& v : variables(g)) {
                    auto it = mc.next_d.find(v.base);
                    if (it == mc.next_d.end()) continue;
                    if (v.m != it->second - c + m || v.k != K) continue;
                    (mc.is_past(v) ? meets_past : meets_dep) = true;
                }
                if (upper ? meets_past : !meets_dep) return false;
            }
            return true;
        };
        int lo = -1, up = -1;
        for (int K = 0; K <= kMaxHeight && (lo < 0 || up < 0); ++K) {
            if (lo < 0 && satisfies(K, false)) lo = K;
            if (up < 0 && satisfies(K, true)) up = K;
        }
        if (lo < 0 || up < 0)
            throw StructuralError(StructuralError::NoAdmissibleMatching,
                                  "no admissible height below " + std::to_string(kMaxHeight) + " for " + s.labels[f],
                                  {s.labels[f]}, {});
        h.k_lower[f] = lo;
        h.k_upper[f] = up;
    }
    h.component = equation_components(s);
    h.K = h.k_upper;
    for (int f = 0; f < s.size(); ++f)
        for (int g = 0; g < s.size(); ++g)
            if (h.component[f] == h.component[g]) h.K[f] = std::max(h.K[f], h.k_upper[g]);
    return h;
}

// ---------------------------------------------------------------------------
// Euler identities

inline long long binomial(int n, int k) {
    long long r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

// x - eps^-n sum_i C(n,i) (-1)^i shift(z, -i), n = m_x - m_z
inline Expr euler_identity(const VarKey& x, const VarKey& z) {
    if (!equivalent(x, z) || x.m <= z.m)
        throw StructuralError(StructuralError::NotRelated, "Euler identity needs x ~ z with m_x > m_z");
    const int n = x.m - z.m;
    Expr sum;
    for (int i = 0; i <= n; ++i) {
        VarKey w = z;
        w.k -= i;
        sum += Expr(Rational(binomial(n, i) * (i % 2 ? -1 : 1))) * Expr::variable(w);
    }
    return Expr::variable(x) - Expr::eps_power(n) * sum;
}

// ---------------------------------------------------------------------------
// the array

struct ArrayEq {
    enum Kind { ModelRow, EulerRow } kind = ModelRow;
    int f = -1, m = 0, k = 0;  // model rows: shift(der(f, m), k)
    VarKey x, z;               // Euler rows: E_{x,z}
    Expr expr;
    std::string name;
    bool leading = false;   // m == c_f
    bool tail = false;      // k == K_f
    bool enabled = false;
    bool inherited = false; // previous-mode equation without dependent variables
};

struct ModeChangeArray {
    ModeChange mc;
    Heights heights;
    std::vector<int> K;       // per new-mode equation
    std::map<int, int> Kb;    // per base
    bool forced_height = false;
    std::vector<ArrayEq> eqs;    // facts excluded
    std::vector<ArrayEq> facts;
    std::vector<char> in_prev;   // new-mode equation also in the previous mode
    std::set<VarKey> vars, past, dependent, tail_vars, restart_states;

    int model_row(int f, int m, int k) const {
        for (size_t i = 0; i < eqs.size(); ++i)
            if (eqs[i].kind == ArrayEq::ModelRow && eqs[i].f == f && eqs[i].m == m && eqs[i].k == k) return int(i);
        return -1;
    }
    int euler_row(const VarKey& x, const VarKey& z) const {
        for (size_t i = 0; i < eqs.size(); ++i)
            if (eqs[i].kind == ArrayEq::EulerRow && eqs[i].x == x && eqs[i].z == z) return int(i);
        return -1;
    }
    bool is_tail_leading(const VarKey& v) const {
        auto it = mc.next_d.find(v.base);
        return tail_vars.count(v) && it != mc.next_d.end() && v.m == it->second;
    }
    std::set<VarKey> tail_dependent() const {
        std::set<VarKey> r;
        for (const auto& v : tail_vars)
            if (!past.count(v)) r.insert(v);
        return r;
    }
    std::string var_name(const VarKey& v) const { return to_string(v, mc.syms); }
};

inline std::string euler_name(const VarKey& x, const VarKey& z, const Symbols& s) {
    return "E[" + to_string(x, s) + "," + to_string(z, s) + "]";
}

// Adds Euler identities for every pair of ~-related array variables (pairs
// of past variables excepted) until no new variable appears.
inline void sim_close(ModeChangeArray& a) {
    std::set<std::pair<VarKey, VarKey>> have;
    for (const auto& e : a.eqs)
        if (e.kind == ArrayEq::EulerRow) have.insert({e.x, e.z});
    for (;;) {
        std::map<std::pair<int, int>, std::vector<VarKey>> classes;
        for (const auto& v : a.vars)
            if (v.role == Role::Plain) classes[{v.base, v.total_degree()}].push_back(v);
        bool added = false;
        for (auto& [key, members] : classes) {
            std::sort(members.begin(), members.end(), [](const VarKey& p, const VarKey& q) { return p.m > q.m; });
            for (size_t i = 0; i < members.size(); ++i)
                for (size_t j = i + 1; j < members.size(); ++j) {
                    const VarKey& x = members[i];
                    const VarKey& z = members[j];
                    if (a.mc.is_past(x) && a.mc.is_past(z)) continue;
                    if (have.count({x, z})) continue;
                    ArrayEq e;
                    e.kind = ArrayEq::EulerRow;
                    e.x = x;
                    e.z = z;
                    e.expr = euler_identity(x, z);
                    e.name = euler_name(x, z, a.mc.syms);
                    have.insert({x, z});
                    a.eqs.push_back(e);
                    added = true;
                }
        }
        std::set<VarKey> nv = a.vars;
        for (const auto& e : a.eqs)
            for (const auto& v : variables(e.expr)) nv.insert(v);
        if (!added && nv == a.vars) break;
        a.vars = std::move(nv);
    }
}

inline ModeChangeArray build_array(const ModeChange& mc, std::optional<int> forced_K = std::nullopt) {
    ModeChangeArray a;
    a.mc = mc;
    const DAESystem& s = mc.next;
    a.heights = compute_height_bounds(mc);
    a.K = a.heights.K;
    if (forced_K) {
        a.forced_height = true;
        std::fill(a.K.begin(), a.K.end(), *forced_K);
    }
    for (int f = 0; f < s.size(); ++f)
        for (const auto& v : variables(s.equations[f])) {
            auto [it, fresh] = a.Kb.emplace(v.base, a.K[f]);
            if (!fresh) it->second = std::max(it->second, a.K[f]);
        }

    a.in_prev.assign(s.size(), 0);
    for (int f = 0; f < s.size(); ++f)
        for (const auto& g : mc.prev.equations)
            if (equal_up_to_constant(s.equations[f], g)) a.in_prev[f] = 1;

    DerivativeCache dc(s);
    int maxK = 0;
    for (int k : a.K) maxK = std::max(maxK, k);
    for (int k = 0; k <= maxK; ++k)
        for (int f = 0; f < s.size(); ++f) {
            if (k > a.K[f]) continue;
            const int c = mc.next_sigma.c[f];
            for (int m = 0; m <= c; ++m) {
                ArrayEq e;
                e.f = f;
                e.m = m;
                e.k = k;
                e.expr = shift(dc.get(f, m), k);
                e.name = row_name(s.labels[f], m, k);
                e.leading = (m == c);
                e.tail = (k == a.K[f]);
                e.enabled = e.tail || a.in_prev[f];
                if (is_fact(mc, e.expr)) {
                    e.enabled = false;
                    a.facts.push_back(e);
                } else {
                    a.eqs.push_back(e);
                }
            }
        }
    for (const auto& e : a.eqs)
        for (const auto& v : variables(e.expr)) a.vars.insert(v);
    sim_close(a);

    for (const auto& v : a.vars) (mc.is_past(v) ? a.past : a.dependent).insert(v);
    for (const auto& [b, d] : mc.next_d) {
        int Kb = a.Kb.count(b) ? a.Kb[b] : 0;
        for (int m = 0; m <= d; ++m) {
            VarKey v = var_key(b, m, Kb);
            a.tail_vars.insert(v);
            if (m < d) a.restart_states.insert(v);
        }
    }
    for (auto& e : a.eqs) {
        if (e.kind != ArrayEq::ModelRow || !a.in_prev[e.f]) continue;
        bool dep = false;
        for (const auto& v : variables(e.expr)) dep = dep || a.dependent.count(v);
        e.inherited = !dep;
    }
    return a;
}

// ---------------------------------------------------------------------------
// canonical matching

struct ArrayMatching {
    std::vector<std::optional<VarKey>> row_var;
    std::map<VarKey, int> var_row;

    void set(int row, const VarKey& v) {
        row_var[row] = v;
        var_row[v] = row;
    }
    void clear(int row) {
        if (row_var[row]) var_row.erase(*row_var[row]);
        row_var[row].reset();
    }
    int row_of(const VarKey& v) const {
        auto it = var_row.find(v);
        return it == var_row.end() ? -1 : it->second;
    }
    int size() const { return int(var_row.size()); }
};

inline BipartiteGraph array_graph(const ModeChangeArray& a, std::vector<VarKey>& cols) {
    cols.assign(a.dependent.begin(), a.dependent.end());
    std::map<VarKey, int> idx;
    for (size_t i = 0; i < cols.size(); ++i) idx[cols[i]] = int(i);
    BipartiteGraph g(int(a.eqs.size()), int(cols.size()));
    for (size_t r = 0; r < a.eqs.size(); ++r)
        for (const auto& v : variables(a.eqs[r].expr))
            if (auto it = idx.find(v); it != idx.end()) g.add_edge(int(r), it->second);
    return g;
}

inline StructuralError no_admissible(const ModeChangeArray& a, const ArrayMatching& m, const std::string& why) {
    std::vector<std::string> eqs, vars;
    for (size_t r = 0; r < a.eqs.size(); ++r)
        if (a.eqs[r].enabled && !a.eqs[r].inherited && !m.row_var[r]) eqs.push_back(a.eqs[r].name);
    for (const auto& v : a.dependent)
        if (!m.var_row.count(v)) vars.push_back(a.var_name(v));
    return StructuralError(StructuralError::NoAdmissibleMatching, why, eqs, vars);
}

// Representative used to link an impulsive member w of a ~-class: the class
// member reached by moving min(mu_w, m_w) derivatives into shifts.
inline std::optional<VarKey> shifted_representative(const VarKey& w, int mu) {
    if (mu <= 0) return std::nullopt;
    int n = std::min(mu, w.m);
    if (n == 0) return std::nullopt;
    return var_key(w.base, w.m - n, w.k + n);
}

inline ArrayMatching canonical_matching(const ModeChangeArray& a, const std::map<VarKey, int>* offsets = nullptr) {
    const ModeChange& mc = a.mc;
    const DAESystem& s = mc.next;
    ArrayMatching M;
    M.row_var.assign(a.eqs.size(), std::nullopt);
    auto dependent = [&](const VarKey& v) { return a.dependent.count(v) > 0; };

    // quotient matching at instant level
    for (int f = 0; f < s.size(); ++f) {
        const int b = mc.matched_base(f);
        const int c = mc.next_sigma.c[f];
        const int d = mc.next_d.at(b);
        for (int k = 0; k <= a.K[f]; ++k) {
            int r = a.model_row(f, c, k);
            VarKey v = var_key(b, d, k);
            if (r >= 0 && dependent(v)) M.set(r, v);
        }
        for (int m = 0; m < c; ++m) {
            int r = a.model_row(f, m, 0);
            VarKey v = var_key(b, d - c + m, 0);
            if (r >= 0 && dependent(v) && !M.var_row.count(v)) M.set(r, v);
        }
    }
    // exchange: tail consistency rows take over from shifted leading rows
    for (int f = 0; f < s.size(); ++f) {
        const int b = mc.matched_base(f);
        const int c = mc.next_sigma.c[f];
        const int d = mc.next_d.at(b);
        const int K = a.K[f];
        if (K == 0) continue;
        for (int m = 0; m < c; ++m) {
            int g = a.model_row(f, m, K);
            if (g < 0) continue;
            int k = K - c + m;
            if (k < 0) throw no_admissible(a, M, "tail consistency row " + a.eqs[g].name + " cannot be matched at this height");
            VarKey u = var_key(b, d - c + m, K);
            if (!dependent(u)) throw no_admissible(a, M, "tail consistency row " + a.eqs[g].name + " only meets past variables");
            int h = a.model_row(f, c, k);
            if (h >= 0) M.clear(h);
            if (int prev = M.row_of(u); prev >= 0) M.clear(prev);
            M.set(g, u);
        }
    }
    // Euler rows: one tree per dependent ~-class, rooted at a member matched
    // by a model row; each tree edge is matched with its child.
    std::map<std::pair<int, int>, std::vector<VarKey>> classes;
    for (const auto& v : a.dependent) classes[{v.base, v.total_degree()}].push_back(v);
    for (auto& [key, members] : classes) {
        if (members.size() == 1 && M.var_row.count(members[0])) continue;
        std::sort(members.begin(), members.end(), [](const VarKey& p, const VarKey& q) { return p.m < q.m; });
        const VarKey zmin = members.front();
        std::set<VarKey> in_class(members.begin(), members.end());
        std::map<VarKey, std::vector<VarKey>> adj;
        for (const auto& w : members) {
            if (w == zmin) continue;
            VarKey p = zmin;
            if (offsets) {
                auto it = offsets->find(w);
                if (it != offsets->end())
                    if (auto z = shifted_representative(w, it->second); z && in_class.count(*z)) p = *z;
            }
            adj[w].push_back(p);
            adj[p].push_back(w);
        }
        std::optional<VarKey> root;
        for (const auto& w : members)
            if (M.var_row.count(w)) {
                root = w;
                break;
            }
        if (!root) throw no_admissible(a, M, "no model equation reaches the class of " + a.var_name(zmin));
        std::vector<VarKey> stack{*root};
        std::set<VarKey> seen{*root};
        while (!stack.empty()) {
            VarKey p = stack.back();
            stack.pop_back();
            for (const auto& c : adj[p]) {
                if (seen.count(c)) continue;
                seen.insert(c);
                stack.push_back(c);
                if (M.var_row.count(c)) continue;
                const VarKey& hi = c.m > p.m ? c : p;
                const VarKey& lo = c.m > p.m ? p : c;
                int r = a.euler_row(hi, lo);
                if (r < 0) throw no_admissible(a, M, "missing Euler identity " + euler_name(hi, lo, mc.syms));
                M.set(r, c);
            }
        }
    }
    // validation
    for (size_t r = 0; r < a.eqs.size(); ++r) {
        if (!M.row_var[r]) continue;
        if (!variables(a.eqs[r].expr).count(*M.row_var[r]))
            throw no_admissible(a, M, "matched variable does not occur in " + a.eqs[r].name);
    }
    for (size_t r = 0; r < a.eqs.size(); ++r)
        if (a.eqs[r].enabled && !a.eqs[r].inherited && !M.row_var[r])
            throw no_admissible(a, M, "enabled equation " + a.eqs[r].name + " is unmatched");
    for (const auto& v : a.dependent)
        if (!M.var_row.count(v)) throw no_admissible(a, M, "dependent variable " + a.var_name(v) + " is unmatched");
    return M;
}

}  // namespace mdae
