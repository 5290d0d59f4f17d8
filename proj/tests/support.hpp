#pragma once
// Shared helpers for the test programs: random expressions and graphs.

#include "mdae/expr.hpp"
#include "mdae/graph.hpp"

#include <random>

namespace mdae::fixtures {

inline Symbols sample_symbols() {
    Symbols s;
    s.add_var("x");
    s.add_var("y");
    s.add_var("z");
    s.params.push_back({"p", Rational(3, 2)});
    s.funcs.push_back({"h", 1, false});
    return s;
}

struct ExprOptions {
    int max_m = 2;
    int max_k = 1;
    int max_eps = 0;      // eps^(-n) with |n| <= max_eps
    bool functions = true;
    int nvars = 3;
};

inline VarKey random_var(std::mt19937& rng, const ExprOptions& o) {
    std::uniform_int_distribution<int> b(0, o.nvars - 1), m(0, o.max_m), k(0, o.max_k);
    return var_key(b(rng), m(rng), k(rng));
}

inline Expr random_expr(std::mt19937& rng, const Symbols& s, const ExprOptions& o, int depth = 3) {
    std::uniform_int_distribution<int> pick(0, 9), coef(-3, 3), eps(-o.max_eps, o.max_eps);
    int c = pick(rng);
    if (depth <= 0 || c < 3) {
        if (c == 0) {
            int v = coef(rng);
            return Expr(v == 0 ? 1 : v);
        }
        if (c == 1) return Expr::parameter(s.param_id("p"));
        return Expr::variable(random_var(rng, o));
    }
    Expr a = random_expr(rng, s, o, depth - 1);
    Expr b = random_expr(rng, s, o, depth - 1);
    switch (c) {
    case 3:
    case 4: return a + b;
    case 5: return a - b;
    case 6:
    case 7: return a * b;
    case 8: return o.max_eps ? Expr::eps_power(eps(rng)) * a : a * Expr(2);
    default:
        if (o.functions) return Expr::apply(s.func_id(std::uniform_int_distribution<int>(0, 1)(rng) ? "sin" : "h"), {a});
        return a * b;
    }
}

inline Valuation random_valuation(std::mt19937& rng, const Expr& e) {
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    Valuation v;
    for (const auto& x : variables(e)) v.vars[x] = u(rng);
    v.functions = [](int, const std::vector<int>& partials, const std::vector<double>& args) {
        // h = exp
        (void)partials;
        return std::exp(args.at(0));
    };
    return v;
}

inline BipartiteGraph random_graph(std::mt19937& rng, int max_eq, int max_var, double density) {
    std::uniform_int_distribution<int> ne(1, max_eq), nv(1, max_var);
    std::bernoulli_distribution edge(density);
    BipartiteGraph g(ne(rng), nv(rng));
    for (int e = 0; e < g.n_eq; ++e)
        for (int v = 0; v < g.n_var; ++v)
            if (edge(rng)) g.add_edge(e, v);
    return g;
}

}  // namespace mdae::fixtures
