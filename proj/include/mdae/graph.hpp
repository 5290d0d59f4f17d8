#pragma once
// Bipartite incidence graphs, maximum matching, Dulmage-Mendelsohn
// decomposition and a small dense assignment solver.

#include <algorithm>
#include <limits>
#include <optional>
#include <set>
#include <stdexcept>
#include <vector>

namespace mdae {

struct BipartiteGraph {
    int n_eq = 0;
    int n_var = 0;
    std::vector<std::vector<int>> adj;  // equation -> sorted variable ids

    BipartiteGraph() = default;
    BipartiteGraph(int e, int v) : n_eq(e), n_var(v), adj(e) {}

    void add_edge(int e, int v) {
        if (e < 0 || e >= n_eq || v < 0 || v >= n_var) throw std::out_of_range("edge references undeclared vertex");
        auto& row = adj[e];
        auto it = std::lower_bound(row.begin(), row.end(), v);
        if (it == row.end() || *it != v) row.insert(it, v);
    }
    bool has_edge(int e, int v) const { return std::binary_search(adj[e].begin(), adj[e].end(), v); }

    std::vector<std::vector<int>> var_adj() const {
        std::vector<std::vector<int>> r(n_var);
        for (int e = 0; e < n_eq; ++e)
            for (int v : adj[e]) r[v].push_back(e);
        return r;
    }
};

struct Matching {
    std::vector<int> eq_to_var;
    std::vector<int> var_to_eq;

    Matching() = default;
    Matching(int e, int v) : eq_to_var(e, -1), var_to_eq(v, -1) {}

    int size() const {
        return int(std::count_if(eq_to_var.begin(), eq_to_var.end(), [](int v) { return v >= 0; }));
    }
    void set(int e, int v) {
        eq_to_var[e] = v;
        var_to_eq[v] = e;
    }
    bool equation_complete() const {
        return std::all_of(eq_to_var.begin(), eq_to_var.end(), [](int v) { return v >= 0; });
    }
    bool variable_complete() const {
        return std::all_of(var_to_eq.begin(), var_to_eq.end(), [](int e) { return e >= 0; });
    }
    bool perfect() const { return eq_to_var.size() == var_to_eq.size() && equation_complete(); }
};

inline bool is_valid_matching(const BipartiteGraph& g, const Matching& m) {
    if (int(m.eq_to_var.size()) != g.n_eq || int(m.var_to_eq.size()) != g.n_var) return false;
    for (int e = 0; e < g.n_eq; ++e) {
        int v = m.eq_to_var[e];
        if (v < 0) continue;
        if (!g.has_edge(e, v) || m.var_to_eq[v] != e) return false;
    }
    for (int v = 0; v < g.n_var; ++v)
        if (m.var_to_eq[v] >= 0 && m.eq_to_var[m.var_to_eq[v]] != v) return false;
    return true;
}

namespace detail {
inline bool augment(const BipartiteGraph& g, int e, Matching& m, std::vector<char>& seen) {
    for (int v : g.adj[e]) {
        if (seen[v]) continue;
        seen[v] = 1;
        if (m.var_to_eq[v] < 0 || augment(g, m.var_to_eq[v], m, seen)) {
            m.set(e, v);
            return true;
        }
    }
    return false;
}
}  // namespace detail

// Kuhn's augmenting paths, equations and variables visited in index order.
// An initial (valid) matching may be supplied and is extended.
inline Matching max_matching(const BipartiteGraph& g, std::optional<Matching> seed = std::nullopt) {
    Matching m = seed ? *seed : Matching(g.n_eq, g.n_var);
    for (int e = 0; e < g.n_eq; ++e) {
        if (m.eq_to_var[e] >= 0) continue;
        std::vector<char> seen(g.n_var, 0);
        detail::augment(g, e, m, seen);
    }
    return m;
}

inline bool is_structurally_nonsingular(const BipartiteGraph& g) {
    return g.n_eq == g.n_var && max_matching(g).size() == g.n_eq;
}

struct DMDecomposition {
    // over-determined, regular, under-determined
    std::vector<int> eq_over, var_over;
    std::vector<int> eq_reg, var_reg;
    std::vector<int> eq_under, var_under;

    bool regular() const { return eq_over.empty() && var_over.empty() && eq_under.empty() && var_under.empty(); }
};

// Coarse DM partition from a maximum matching: the under-determined part is
// everything alternating-reachable from an unmatched variable, the
// over-determined part everything reachable from an unmatched equation.
inline DMDecomposition dm_decompose(const BipartiteGraph& g, std::optional<Matching> seed = std::nullopt) {
    Matching m = max_matching(g, seed);
    auto vadj = g.var_adj();
    std::vector<char> eu(g.n_eq, 0), vu(g.n_var, 0), eo(g.n_eq, 0), vo(g.n_var, 0);

    std::vector<int> stack;
    for (int v = 0; v < g.n_var; ++v)
        if (m.var_to_eq[v] < 0) {
            vu[v] = 1;
            stack.push_back(v);
        }
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        for (int e : vadj[v]) {
            if (eu[e]) continue;
            eu[e] = 1;
            int w = m.eq_to_var[e];
            if (w >= 0 && !vu[w]) {
                vu[w] = 1;
                stack.push_back(w);
            }
        }
    }
    for (int e = 0; e < g.n_eq; ++e)
        if (m.eq_to_var[e] < 0) {
            eo[e] = 1;
            stack.push_back(e);
        }
    while (!stack.empty()) {
        int e = stack.back();
        stack.pop_back();
        for (int v : g.adj[e]) {
            if (vo[v]) continue;
            vo[v] = 1;
            int f = m.var_to_eq[v];
            if (f >= 0 && !eo[f]) {
                eo[f] = 1;
                stack.push_back(f);
            }
        }
    }
    DMDecomposition d;
    for (int e = 0; e < g.n_eq; ++e) (eo[e] ? d.eq_over : eu[e] ? d.eq_under : d.eq_reg).push_back(e);
    for (int v = 0; v < g.n_var; ++v) (vo[v] ? d.var_over : vu[v] ? d.var_under : d.var_reg).push_back(v);
    return d;
}

// Merge variables by class id; class c is adjacent to f iff some member is.
inline BipartiteGraph quotient_graph(const BipartiteGraph& g, const std::vector<int>& var_class, int n_classes) {
    BipartiteGraph q(g.n_eq, n_classes);
    for (int e = 0; e < g.n_eq; ++e)
        for (int v : g.adj[e]) q.add_edge(e, var_class.at(v));
    return q;
}

// Maximum-weight perfect assignment on a square matrix; nullopt entries are
// forbidden. Returns the row->column assignment, or nullopt if none exists.
// Hungarian algorithm (potentials form), O(n^3).
inline std::optional<std::vector<int>> max_weight_assignment(const std::vector<std::vector<std::optional<long long>>>& w) {
    const int n = int(w.size());
    if (n == 0) return std::vector<int>{};
    const long long BIG = 1LL << 40;
    const long long INF = std::numeric_limits<long long>::max() / 4;
    auto cost = [&](int i, int j) -> long long { return w[i][j] ? -*w[i][j] : BIG; };
    std::vector<long long> u(n + 1, 0), v(n + 1, 0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<long long> minv(n + 1, INF);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            int i0 = p[j0], j1 = 0;
            long long delta = INF;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                long long cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> row(n, -1);
    for (int j = 1; j <= n; ++j) row[p[j] - 1] = j - 1;
    for (int i = 0; i < n; ++i)
        if (!w[i][row[i]]) return std::nullopt;
    return row;
}

inline std::optional<long long> assignment_value(const std::vector<std::vector<std::optional<long long>>>& w) {
    auto a = max_weight_assignment(w);
    if (!a) return std::nullopt;
    long long s = 0;
    for (size_t i = 0; i < a->size(); ++i) s += *w[i][(*a)[i]];
    return s;
}

// Among maximum-weight perfect assignments, the lexicographically smallest
// (row 0 takes its lowest admissible column, then row 1, ...).
inline std::optional<std::vector<int>> canonical_max_weight_assignment(
    const std::vector<std::vector<std::optional<long long>>>& w) {
    auto best = assignment_value(w);
    if (!best) return std::nullopt;
    const int n = int(w.size());
    auto cur = w;
    std::vector<int> row(n, -1);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (!cur[i][j]) continue;
            auto trial = cur;
            for (int jj = 0; jj < n; ++jj)
                if (jj != j) trial[i][jj] = std::nullopt;
            for (int ii = 0; ii < n; ++ii)
                if (ii != i) trial[ii][j] = std::nullopt;
            auto val = assignment_value(trial);
            if (val && *val == *best) {
                cur = std::move(trial);
                row[i] = j;
                break;
            }
        }
        if (row[i] < 0) return std::nullopt;
    }
    return row;
}

}  // namespace mdae
