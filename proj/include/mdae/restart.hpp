#pragma once
// Restart synthesis: rescale the matched array, let eps vanish, rename to
// left limits / restart values / auxiliaries. Diagnosis when no good
// solution exists, and the numeric side (Newton, eps-convergence, Lambda).

#include "mdae/error.hpp"
#include "mdae/expr.hpp"
#include "mdae/graph.hpp"
#include "mdae/mcarray.hpp"
#include "mdae/rescale.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace mdae {

inline VarKey with_role(VarKey v, Role r) {
    v.role = r;
    return v;
}
inline VarKey down(const VarKey& v) { return with_role(v, Role::Down); }
inline VarKey left_of(int base, int m) { return VarKey{base, m, 0, Role::Left}; }
inline VarKey right_of(int base, int m) { return VarKey{base, m, 0, Role::Right}; }

struct RowExpr {
    std::string name;
    Expr expr;
    std::optional<VarKey> matched;  // array variable matched with the row (plain role)
    int row = -1;                   // index in the array, -1 for generated rows
};

// ---------------------------------------------------------------------------
// rescaling and the eps -> 0 limit

// eps^{mu_f} e[x := eps^{-mu_x} down(x)]
inline Expr rescale_expr(const Expr& e, int mu_f, const Offsets& mu) {
    Expr r = map_vars(e, [&](const VarKey& v) {
        int u = offset_of(mu, v);
        if (u == 0 || v.role != Role::Plain) return Expr::variable(v);
        return Expr::eps_power(u) * Expr::variable(down(v));
    });
    return Expr::eps_power(-mu_f) * r;
}

// Matched rows only, each rescaled by its own offset.
inline std::vector<RowExpr> rescale_array(const ModeChangeArray& a, const ArrayMatching& m, const RescalingSolution& s) {
    std::vector<RowExpr> out;
    for (size_t r = 0; r < a.eqs.size(); ++r) {
        if (!m.row_var[r]) continue;
        auto mf = s.mu_eq[r];
        if (!mf || *mf >= kInf)
            throw StructuralError(StructuralError::UnrescalableEquation, "equation " + a.eqs[r].name + " has infinite offset",
                                  {a.eqs[r].name}, {});
        out.push_back({a.eqs[r].name, rescale_expr(a.eqs[r].expr, *mf, s.mu), m.row_var[r], int(r)});
    }
    return out;
}

// Drops monomials carrying a positive power of eps. With `naive`, rows that
// still hold negative powers are first multiplied through by the largest one.
inline Expr epsilon_limit(const Expr& e, bool naive = false) {
    int worst = 0;
    for (const auto& t : e.terms()) worst = std::max(worst, t.mono.eps);
    Expr src = e;
    if (worst > 0) {
        if (!naive) throw StructuralError(StructuralError::UnrescalableEquation, "negative power of eps survives rescaling");
        src = Expr::eps_power(-worst) * e;
    }
    std::vector<Term> kept;
    for (const auto& t : src.terms())
        if (t.mono.eps == 0) kept.push_back(t);
    return Expr::from_terms(std::move(kept));
}

// Unknowns of a row set: everything except past variables and left limits.
inline std::vector<VarKey> unknowns_of(const std::vector<RowExpr>& rows, const std::set<VarKey>& past) {
    std::set<VarKey> u;
    for (const auto& r : rows)
        for (const auto& v : variables(r.expr))
            if (v.role != Role::Left && !past.count(v)) u.insert(v);
    return {u.begin(), u.end()};
}

inline BipartiteGraph row_graph(const std::vector<RowExpr>& rows, const std::vector<VarKey>& cols) {
    std::map<VarKey, int> idx;
    for (size_t i = 0; i < cols.size(); ++i) idx[cols[i]] = int(i);
    BipartiteGraph g(int(rows.size()), int(cols.size()));
    for (size_t r = 0; r < rows.size(); ++r)
        for (const auto& v : variables(rows[r].expr))
            if (auto it = idx.find(v); it != idx.end()) g.add_edge(int(r), it->second);
    return g;
}

inline StructuralError singular_rows(StructuralError::Kind kind, const std::string& what, const std::vector<RowExpr>& rows,
                                     const std::vector<VarKey>& cols, const Symbols& syms) {
    auto dm = dm_decompose(row_graph(rows, cols));
    std::vector<std::string> eqs, vars;
    for (int e : dm.eq_over) eqs.push_back(rows[e].name);
    for (int e : dm.eq_under) eqs.push_back(rows[e].name);
    for (int v : dm.var_over) vars.push_back(to_string(cols[v], syms));
    for (int v : dm.var_under) vars.push_back(to_string(cols[v], syms));
    return StructuralError(kind, what, eqs, vars);
}

// Rule 1: the eps = 0 system must stay structurally nonsingular.
inline void check_rule1(const std::vector<RowExpr>& rows, const std::set<VarKey>& past, const Symbols& syms) {
    auto cols = unknowns_of(rows, past);
    if (cols.size() != rows.size() || !is_structurally_nonsingular(row_graph(rows, cols)))
        throw singular_rows(StructuralError::Rule1Violation, "system at eps = 0 is structurally singular", rows, cols, syms);
}

inline std::vector<RowExpr> set_epsilon_zero(std::vector<RowExpr> rows, const std::set<VarKey>& past, const Symbols& syms,
                                             bool naive = false) {
    for (auto& r : rows) r.expr = epsilon_limit(r.expr, naive);
    check_rule1(rows, past, syms);
    return rows;
}

// ---------------------------------------------------------------------------
// the restart system

struct RestartSystem {
    Symbols syms;
    std::vector<std::string> labels;
    std::vector<Expr> equations;
    std::vector<VarKey> unknowns;        // right(...) and auxiliaries
    std::set<VarKey> left_limits;        // left(...) occurring
    std::vector<VarKey> restart_states;  // right(b^(d)), d < d_b
    std::map<VarKey, Expr> eliminated;   // down(x) -> finite difference, array names
    std::map<VarKey, VarKey> rename;     // array name -> restart name

    int size() const { return int(equations.size()); }
};

// Left limits for past variables, restart values for the tail, array names
// (possibly rescaled) for the head.
inline std::optional<VarKey> rename_var(const ModeChangeArray& a, const VarKey& v) {
    if (v.role == Role::Down) {
        VarKey p = with_role(v, Role::Plain);
        if (!a.vars.count(p)) return std::nullopt;
        return v;
    }
    if (v.role != Role::Plain) return v;
    if (a.past.count(v)) return left_of(v.base, v.m);
    if (a.tail_vars.count(v)) return right_of(v.base, v.m);
    if (a.vars.count(v)) return v;
    return std::nullopt;
}

inline Expr rename_expr(const ModeChangeArray& a, const Expr& e, std::map<VarKey, VarKey>* record = nullptr) {
    return map_vars(e, [&](const VarKey& v) {
        auto r = rename_var(a, v);
        if (!r)
            throw StructuralError(StructuralError::UndefinedRename, "variable " + a.var_name(with_role(v, Role::Plain)) +
                                                                        " lies outside the array",
                                  {}, {a.var_name(with_role(v, Role::Plain))});
        if (record) (*record)[v] = *r;
        return Expr::variable(*r);
    });
}

// Euler rows reduced to down(x) - (finite difference) define their
// auxiliary; substitute it away and drop the row.
inline std::map<VarKey, Expr> eliminate_euler_aux(const ModeChangeArray& a, std::vector<RowExpr>& rows) {
    std::map<VarKey, Expr> defs;
    for (size_t i = 0; i < rows.size();) {
        const RowExpr& r = rows[i];
        bool done = false;
        if (r.row >= 0 && a.eqs[r.row].kind == ArrayEq::EulerRow) {
            VarKey x = a.eqs[r.row].x;
            VarKey dx = down(x);
            if (!a.tail_vars.count(x)) {
                Expr coef = partial_derivative(r.expr, dx);
                auto c = coef.constant_value();
                Expr rest = r.expr - coef * Expr::variable(dx);
                if (c && *c != Rational(0) && !variables(rest).count(dx)) {
                    Expr val = Expr(-Rational(1) / *c) * rest;
                    for (auto& [k, d] : defs) d = substitute(d, {{dx, val}});
                    defs[dx] = val;
                    for (auto& o : rows) o.expr = substitute(o.expr, {{dx, val}});
                    rows.erase(rows.begin() + long(i));
                    done = true;
                }
            }
        }
        if (!done) ++i;
    }
    return defs;
}

inline std::vector<RowExpr> continuity_rows(const ModeChangeArray& a) {
    std::vector<RowExpr> out;
    for (const auto& v : a.restart_states) {
        if (!a.past.count(v)) continue;
        std::string n = "cont(" + var_core(a.mc.syms, v.base, v.m) + ")";
        out.push_back({n, Expr::variable(right_of(v.base, v.m)) - Expr::variable(left_of(v.base, v.m)), std::nullopt, -1});
    }
    return out;
}

// Procedure on an arbitrary subset of matched rows (all of them for a good
// solution, the regular part for a diagnosis).
inline RestartSystem build_restart(const ModeChangeArray& a, std::vector<RowExpr> rows, const std::set<VarKey>& states_kept) {
    RestartSystem rs;
    rs.syms = a.mc.syms;
    rs.eliminated = eliminate_euler_aux(a, rows);
    std::vector<RowExpr> kept;
    for (auto& r : rows) {
        if (r.matched && a.is_tail_leading(*r.matched)) continue;
        kept.push_back(std::move(r));
    }
    // continuity only for the states this system is about
    for (auto& c : continuity_rows(a))
        for (const auto& v : variables(c.expr))
            if (v.role == Role::Right && states_kept.count(var_key(v.base, v.m, a.Kb.count(v.base) ? a.Kb.at(v.base) : 0)))
                kept.push_back(c);
    for (const auto& r : kept) {
        rs.labels.push_back(r.name);
        rs.equations.push_back(rename_expr(a, r.expr, &rs.rename));
    }
    std::set<VarKey> unk;
    for (const auto& e : rs.equations)
        for (const auto& v : variables(e)) (v.role == Role::Left ? rs.left_limits : unk).insert(v);
    rs.unknowns.assign(unk.begin(), unk.end());
    for (const auto& v : a.restart_states) rs.restart_states.push_back(right_of(v.base, v.m));
    return rs;
}

inline bool is_nonsingular(const RestartSystem& rs) {
    std::map<VarKey, int> idx;
    for (size_t i = 0; i < rs.unknowns.size(); ++i) idx[rs.unknowns[i]] = int(i);
    BipartiteGraph g(rs.size(), int(rs.unknowns.size()));
    for (int r = 0; r < rs.size(); ++r)
        for (const auto& v : variables(rs.equations[r]))
            if (auto it = idx.find(v); it != idx.end()) g.add_edge(r, it->second);
    return is_structurally_nonsingular(g);
}

// Good solution: the full procedure.
inline RestartSystem restart_from_solution(const ModeChangeArray& a, const ArrayMatching& m, const RescalingSolution& s) {
    if (!s.g39)
        throw StructuralError(StructuralError::UndefinedRename, "goodness condition (39) fails; renaming is undefined", {},
                              [&] {
                                  std::vector<std::string> v;
                                  for (const auto& w : s.w39) v.push_back(a.var_name(w));
                                  return v;
                              }());
    auto rows = set_epsilon_zero(rescale_array(a, m, s), a.past, a.mc.syms);
    RestartSystem rs = build_restart(a, std::move(rows), a.restart_states);
    if (!is_nonsingular(rs)) {
        std::vector<RowExpr> rr;
        for (int i = 0; i < rs.size(); ++i) rr.push_back({rs.labels[i], rs.equations[i], std::nullopt, -1});
        throw singular_rows(StructuralError::Rule1Violation, "restart system is structurally singular", rr, rs.unknowns, rs.syms);
    }
    return rs;
}

// The same steps with all offsets zero: what happens when rescaling is skipped.
inline std::vector<RowExpr> unrescaled_limit(const ModeChangeArray& a, const ArrayMatching& m) {
    std::vector<RowExpr> rows;
    for (size_t r = 0; r < a.eqs.size(); ++r)
        if (m.row_var[r]) rows.push_back({a.eqs[r].name, a.eqs[r].expr, m.row_var[r], int(r)});
    return set_epsilon_zero(std::move(rows), a.past, a.mc.syms, true);
}

// ---------------------------------------------------------------------------
// diagnosis

struct Diagnosis {
    std::vector<std::string> violated;  // "37", "38", "39"
    std::vector<VarKey> removed_for;    // variables whose matched rows were removed
    std::vector<std::string> removed_rows;
    std::vector<std::string> regular_rows;
    std::vector<VarKey> determined;    // restart names
    std::vector<VarKey> undetermined;  // restart names
    std::optional<RestartSystem> reduced;
    std::string note;
};

inline Diagnosis diagnose(const ModeChangeArray& a, const ArrayMatching& m, const RescalingSolution& s) {
    Diagnosis d;
    if (!s.g37) d.violated.push_back("37");
    if (!s.g38) d.violated.push_back("38");
    if (!s.g39) d.violated.push_back("39");
    auto all_undetermined = [&] {
        for (const auto& v : a.restart_states)
            (a.past.count(v) ? d.determined : d.undetermined).push_back(right_of(v.base, v.m));
    };
    if (!s.g37) {
        d.note = "some matched equation cannot be rescaled";
        all_undetermined();
        return d;
    }
    std::set<VarKey> Y(s.w39.begin(), s.w39.end());
    Y.insert(s.w38.begin(), s.w38.end());
    d.removed_for.assign(Y.begin(), Y.end());

    std::vector<RowExpr> rows;
    for (size_t r = 0; r < a.eqs.size(); ++r) {
        if (!m.row_var[r]) continue;
        if (Y.count(*m.row_var[r])) {
            d.removed_rows.push_back(a.eqs[r].name);
            continue;
        }
        rows.push_back({a.eqs[r].name, a.eqs[r].expr, m.row_var[r], int(r)});
    }
    std::vector<VarKey> cols(a.dependent.begin(), a.dependent.end());
    Matching seed(int(rows.size()), int(cols.size()));
    std::map<VarKey, int> idx;
    for (size_t i = 0; i < cols.size(); ++i) idx[cols[i]] = int(i);
    for (size_t r = 0; r < rows.size(); ++r) seed.set(int(r), idx.at(*rows[r].matched));
    auto dm = dm_decompose(row_graph(rows, cols), seed);

    std::vector<RowExpr> reg;
    for (int e : dm.eq_reg) reg.push_back(rows[e]);
    std::set<VarKey> reg_vars;
    for (int v : dm.var_reg) reg_vars.insert(cols[v]);
    for (const auto& r : reg) d.regular_rows.push_back(r.name);

    std::set<VarKey> kept_states;
    for (const auto& v : a.restart_states) {
        bool det = a.past.count(v) || reg_vars.count(v);
        (det ? d.determined : d.undetermined).push_back(right_of(v.base, v.m));
        if (det) kept_states.insert(v);
    }
    try {
        RescalingSolution sr = s;
        std::vector<RowExpr> scaled;
        for (const auto& r : reg) {
            int mf = s.mu_eq[r.row].value_or(0);
            scaled.push_back({r.name, rescale_expr(r.expr, mf, s.mu), r.matched, r.row});
        }
        for (auto& r : scaled) r.expr = epsilon_limit(r.expr);
        d.reduced = build_restart(a, std::move(scaled), kept_states);
    } catch (const StructuralError& e) {
        d.note = e.what();
    }
    return d;
}

// ---------------------------------------------------------------------------
// pipeline

struct RestartResult {
    ModeChangeArray array;
    ArrayMatching matching;
    RescalingSolution solution;
    std::optional<RestartSystem> restart;
    std::optional<Diagnosis> diagnosis;

    bool good() const { return restart.has_value(); }
};

inline RestartResult generate_restart(const ModeChange& mc, std::optional<int> forced_K = std::nullopt) {
    RestartResult r;
    r.array = build_array(mc, forced_K);
    auto mr = match_and_rescale(r.array);
    r.matching = std::move(mr.matching);
    r.solution = std::move(mr.solution);
    if (r.solution.good())
        r.restart = restart_from_solution(r.array, r.matching, r.solution);
    else
        r.diagnosis = diagnose(r.array, r.matching, r.solution);
    return r;
}

// ---------------------------------------------------------------------------
// numerics

struct NewtonOptions {
    double tol = 1e-10;
    int max_iter = 60;
};

// Solves rows = 0 for `unknowns`, other variables taken from `fixed`.
inline std::map<VarKey, double> newton_solve(const std::vector<Expr>& rows, const std::vector<VarKey>& unknowns,
                                             const Valuation& fixed, std::map<VarKey, double> guess, double eps,
                                             const Symbols& syms, const NewtonOptions& opt = {}) {
    const int n = int(unknowns.size());
    if (int(rows.size()) != n) throw NumericError(NumericError::SingularJacobian, "system is not square");
    std::vector<std::vector<Expr>> jac(n, std::vector<Expr>(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) jac[i][j] = partial_derivative(rows[i], unknowns[j]);
    Valuation val = fixed;
    for (const auto& u : unknowns) val.vars[u] = guess.count(u) ? guess[u] : 0.0;
    Eigen::VectorXd F(n);
    Eigen::MatrixXd J(n, n);
    for (int it = 0; it <= opt.max_iter; ++it) {
        for (int i = 0; i < n; ++i) F(i) = evaluate(rows[i], val, eps, syms);
        if (n == 0 || F.lpNorm<Eigen::Infinity>() < opt.tol) {
            std::map<VarKey, double> out;
            for (const auto& u : unknowns) out[u] = val.vars[u];
            return out;
        }
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) J(i, j) = evaluate(jac[i][j], val, eps, syms);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
        if (lu.rank() < n) throw NumericError(NumericError::SingularJacobian, "Jacobian is numerically singular");
        Eigen::VectorXd dx = lu.solve(-F);
        for (int j = 0; j < n; ++j) val.vars[unknowns[j]] += dx(j);
    }
    throw NumericError(NumericError::NonConvergence, "Newton iteration did not converge");
}

// Left limits are keyed by left(b^(m)). Extra parameter / function
// bindings come through `extra`.
inline std::map<VarKey, double> solve_restart_numeric(const RestartSystem& rs, const std::map<VarKey, double>& left,
                                                      const Valuation& extra = {}, const NewtonOptions& opt = {}) {
    Valuation fixed = extra;
    for (const auto& [k, v] : left) fixed.vars[k] = v;
    for (const auto& l : rs.left_limits)
        if (!fixed.vars.count(l)) throw EvalError(EvalError::MissingVariable, "missing left limit " + to_string(l, rs.syms));
    std::map<VarKey, double> guess;
    for (const auto& u : rs.unknowns)
        if (u.role == Role::Right) {
            auto it = left.find(left_of(u.base, u.m));
            guess[u] = it == left.end() ? 0.0 : it->second;
        }
    return newton_solve(rs.equations, rs.unknowns, fixed, guess, 0.0, rs.syms, opt);
}

// Value of a past array variable at step eps, from the left limits:
// shift(b^(m), k) = sum_i C(k,i) eps^i (b^(m+i))^-.
inline double past_value(const VarKey& v, const std::map<VarKey, double>& left, double eps) {
    double s = 0;
    for (int i = 0; i <= v.k; ++i) {
        auto it = left.find(left_of(v.base, v.m + i));
        if (it == left.end()) throw EvalError(EvalError::MissingVariable, "missing left limit for past variable");
        s += double(binomial(v.k, i)) * std::pow(eps, i) * it->second;
    }
    return s;
}

struct ConvergencePoint {
    double eps = 0;
    double distance = 0;
};

struct ConvergenceReport {
    std::vector<ConvergencePoint> points;
    bool decreasing = true;
    std::optional<double> order;  // least observed log-ratio slope
};

// Solves the rescaled matched array at each eps (largest first, warm
// started) and measures the distance of restart values and surviving
// auxiliaries to the eps = 0 restart valuation.
inline ConvergenceReport epsilon_convergence_check(const ModeChangeArray& a, const ArrayMatching& m, const RescalingSolution& s,
                                                   const RestartSystem& rs, const std::map<VarKey, double>& restart_val,
                                                   const std::map<VarKey, double>& left, std::vector<double> eps_list,
                                                   const Valuation& extra = {}) {
    std::vector<Expr> rows;
    std::set<VarKey> unk;
    for (size_t r = 0; r < a.eqs.size(); ++r) {
        if (!m.row_var[r]) continue;
        Expr e = rescale_expr(a.eqs[r].expr, s.mu_eq[r].value_or(0), s.mu);
        rows.push_back(e);
        for (const auto& v : variables(e))
            if (!a.past.count(v)) unk.insert(v);
    }
    std::vector<VarKey> unknowns(unk.begin(), unk.end());

    // initial guess from the restart valuation
    std::map<VarKey, double> guess;
    for (const auto& u : unknowns) {
        auto it = rs.rename.find(u);
        if (it != rs.rename.end() && restart_val.count(it->second)) guess[u] = restart_val.at(it->second);
    }
    std::sort(eps_list.begin(), eps_list.end(), std::greater<>());
    ConvergenceReport rep;
    for (double eps : eps_list) {
        Valuation fixed = extra;
        for (const auto& v : a.past) fixed.vars[v] = past_value(v, left, eps);
        auto sol = newton_solve(rows, unknowns, fixed, guess, eps, rs.syms);
        guess = sol;
        double dist = 0;
        for (const auto& u : unknowns) {
            auto it = rs.rename.find(u);
            if (it == rs.rename.end()) continue;
            const VarKey& target = it->second;
            if (target.role == Role::Left || !restart_val.count(target)) continue;
            if (target.role == Role::Plain) continue;  // unrescaled head variables are not compared
            dist = std::max(dist, std::abs(sol[u] - restart_val.at(target)));
        }
        rep.points.push_back({eps, dist});
    }
    for (size_t i = 1; i < rep.points.size(); ++i) {
        const auto& p = rep.points[i - 1];
        const auto& q = rep.points[i];
        if (!(q.distance < p.distance)) rep.decreasing = false;
        if (p.distance > 0 && q.distance > 0) {
            double ord = std::log(p.distance / q.distance) / std::log(p.eps / q.eps);
            rep.order = rep.order ? std::min(*rep.order, ord) : ord;
        }
    }
    return rep;
}

// Lambda(f) = (eps^{mu(f)} f[x := eps^{-mu_x} down(x)])[eps := 0]
inline Expr apply_lambda(const Expr& e, const Offsets& mu) {
    auto o = expr_offset(e, mu);
    if (!o) return e;
    if (*o >= kInf) throw NumericError(NumericError::InfiniteOffset, "expression has infinite offset");
    return epsilon_limit(rescale_expr(e, *o, mu));
}

// Lambda of an array-level expression, written in restart names.
inline Expr lambda_in_restart_names(const ModeChangeArray& a, const RestartSystem& rs, const Expr& e, const Offsets& mu) {
    Expr l = substitute(apply_lambda(e, mu), rs.eliminated);
    return rename_expr(a, l);
}

struct InvariantCheck {
    std::vector<double> residuals;
    double max_residual = 0;
};

inline InvariantCheck check_invariant_preservation(const ModeChangeArray& a, const RestartSystem& rs,
                                                   const std::vector<Expr>& combos, const Offsets& mu,
                                                   const std::map<VarKey, double>& restart_val,
                                                   const std::map<VarKey, double>& left, const Valuation& extra = {}) {
    InvariantCheck out;
    Valuation val = extra;
    for (const auto& [k, v] : left) val.vars[k] = v;
    for (const auto& [k, v] : restart_val) val.vars[k] = v;
    for (const auto& c : combos) {
        double r = std::abs(evaluate(lambda_in_restart_names(a, rs, c, mu), val, 0.0, rs.syms));
        out.residuals.push_back(r);
        out.max_residual = std::max(out.max_residual, r);
    }
    return out;
}

}  // namespace mdae
