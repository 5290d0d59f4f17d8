#pragma once
// Sigma-method index reduction for one mode.

#include "mdae/error.hpp"
#include "mdae/expr.hpp"
#include "mdae/graph.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mdae {

struct DAESystem {
    std::vector<std::string> labels;
    std::vector<Expr> equations;  // each read as 0 = e
    std::vector<int> vars;        // dependent base variables

    int size() const { return int(equations.size()); }
};

// Highest differentiation order of base b in e (inside function arguments too).
inline std::optional<int> signature(const Expr& e, int b) {
    std::optional<int> s;
    for (const VarKey& v : variables(e))
        if (v.base == b && v.role == Role::Plain && (!s || v.m > *s)) s = v.m;
    return s;
}

using SignatureMatrix = std::vector<std::vector<std::optional<long long>>>;

inline SignatureMatrix signature_matrix(const DAESystem& s) {
    SignatureMatrix w(s.size(), std::vector<std::optional<long long>>(s.vars.size()));
    for (int f = 0; f < s.size(); ++f)
        for (size_t j = 0; j < s.vars.size(); ++j)
            if (auto sg = signature(s.equations[f], s.vars[j])) w[f][j] = *sg;
    return w;
}

inline BipartiteGraph incidence(const DAESystem& s) {
    BipartiteGraph g(s.size(), int(s.vars.size()));
    auto w = signature_matrix(s);
    for (int f = 0; f < s.size(); ++f)
        for (size_t j = 0; j < s.vars.size(); ++j)
            if (w[f][j]) g.add_edge(f, int(j));
    return g;
}

struct SigmaOffsets {
    std::vector<int> c;      // per equation
    std::vector<int> d;      // per variable (index into DAESystem::vars)
    std::vector<int> match;  // equation -> variable index

    int var_index_of_eq(int f) const { return match[f]; }
    int eq_of_var(int j) const {
        for (size_t f = 0; f < match.size(); ++f)
            if (match[f] == j) return int(f);
        return -1;
    }
};

inline std::vector<std::string> names_of(const DAESystem& s, const std::vector<int>& eq_ids) {
    std::vector<std::string> r;
    for (int f : eq_ids) r.push_back(s.labels[f]);
    return r;
}

inline StructuralError singular_error(const DAESystem& s, const Symbols& syms, const std::string& what) {
    auto dm = dm_decompose(incidence(s));
    std::vector<std::string> eqs, vars;
    for (int f : dm.eq_over) eqs.push_back(s.labels[f]);
    for (int f : dm.eq_under) eqs.push_back(s.labels[f]);
    for (int j : dm.var_over) vars.push_back(syms.vars[s.vars[j]]);
    for (int j : dm.var_under) vars.push_back(syms.vars[s.vars[j]]);
    return StructuralError(StructuralError::StructurallySingular, what, eqs, vars);
}

inline SigmaOffsets solve_sigma(const DAESystem& s, const Symbols& syms) {
    const int n = s.size();
    if (int(s.vars.size()) != n)
        throw singular_error(s, syms, "system is not square: " + std::to_string(n) + " equations, " +
                                          std::to_string(s.vars.size()) + " variables");
    auto w = signature_matrix(s);
    auto assign = canonical_max_weight_assignment(w);
    if (!assign) throw singular_error(s, syms, "no perfect matching");

    SigmaOffsets r;
    r.match = *assign;
    r.c.assign(n, 0);
    r.d.assign(n, 0);
    long long maxs = 0;
    for (auto& row : w)
        for (auto& x : row)
            if (x) maxs = std::max(maxs, *x);
    const long long bound = n * (1 + maxs);
    for (;;) {
        for (int j = 0; j < n; ++j) {
            long long best = 0;
            for (int f = 0; f < n; ++f)
                if (w[f][j]) best = std::max(best, r.c[f] + *w[f][j]);
            r.d[j] = int(best);
        }
        bool changed = false;
        for (int f = 0; f < n; ++f) {
            int nc = r.d[r.match[f]] - int(*w[f][r.match[f]]);
            if (nc != r.c[f]) {
                r.c[f] = nc;
                changed = true;
            }
            if (nc > bound || nc < 0)
                throw StructuralError(StructuralError::NonConvergent, "offset iteration exceeded bound on " + s.labels[f]);
        }
        if (!changed) break;
    }
    return r;
}

struct CompletedRow {
    int eq = 0;  // index in the DAESystem
    int m = 0;   // differentiation order
    Expr expr;
};

struct CompletedSystem {
    std::vector<CompletedRow> leading;      // f^(c_f)
    std::vector<CompletedRow> consistency;  // f^(m), m < c_f
    // M_down: leading[i] matched with (var index, d); M_up: consistency[i]
    std::vector<std::pair<int, int>> leading_match;
    std::vector<std::pair<int, int>> consistency_match;

    std::vector<CompletedRow> completion() const {
        std::vector<CompletedRow> r = consistency;
        r.insert(r.end(), leading.begin(), leading.end());
        return r;
    }
};

inline CompletedSystem complete(const DAESystem& s, const SigmaOffsets& o) {
    CompletedSystem cs;
    for (int f = 0; f < s.size(); ++f) {
        Expr e = s.equations[f];
        int j = o.match[f];
        for (int m = 0; m <= o.c[f]; ++m) {
            if (m == o.c[f]) {
                cs.leading.push_back({f, m, e});
                cs.leading_match.push_back({j, o.d[j]});
            } else {
                cs.consistency.push_back({f, m, e});
                cs.consistency_match.push_back({j, o.d[j] - o.c[f] + m});
            }
            e = differentiate(e);
        }
    }
    return cs;
}

}  // namespace mdae
