#include "mdae/corpus.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace mdae;

namespace {

struct Case {
    Model model;
    RestartResult result;
};

Case corpus_case(const std::string& name, std::optional<int> K = std::nullopt) {
    Model m = load_model(std::string(MDAE_CORPUS_DIR) + "/" + name + "/model.mdae");
    const Transition& t = m.transitions.front();
    auto r = generate_restart(make_mode_change(m, t.from, t.to), K);
    return {std::move(m), std::move(r)};
}

VarKey L(const Model& m, const std::string& v) {
    VarKey k = parse_var(m, v);
    return left_of(k.base, k.m);
}
VarKey R(const Model& m, const std::string& v) {
    VarKey k = parse_var(m, v);
    return right_of(k.base, k.m);
}

double eval_at(const Model& m, const std::string& text, const std::map<VarKey, double>& left,
               const std::map<VarKey, double>& sol, const Valuation& extra = {}) {
    Valuation v = extra;
    for (const auto& [k, x] : left) v.vars[k] = x;
    for (const auto& [k, x] : sol) v.vars[k] = x;
    return evaluate(parse_expr(m, text), v, 0.0, m.syms);
}

// Consistency equations of the new mode (each f with c_f > 0 and its
// derivatives below c_f) read at the restart instant.
double consistency_residual(const RestartResult& r, const std::map<VarKey, double>& left,
                            const std::map<VarKey, double>& sol, const Valuation& extra = {}) {
    const ModeChange& mc = r.array.mc;
    Valuation v = extra;
    for (const auto& [k, x] : left) v.vars[k] = x;
    for (const auto& [k, x] : sol) v.vars[k] = x;
    double worst = 0;
    for (int f = 0; f < mc.next.size(); ++f)
        for (int j = 0; j < mc.next_sigma.c[f]; ++j) {
            Expr e = map_vars(differentiate(mc.next.equations[f], j),
                              [](const VarKey& x) { return Expr::variable(right_of(x.base, x.m)); });
            worst = std::max(worst, std::abs(evaluate(e, v, 0.0, mc.syms)));
        }
    return worst;
}

// w + w^3/3 for h, identity for the friction laws
Valuation clutch_functions(const Model& m) {
    Valuation v;
    const int h = m.syms.func_id("h");
    v.functions = [h](int fid, const std::vector<int>& partials, const std::vector<double>& a) {
        double w = a.at(0);
        if (fid == h) {
            switch (partials.size()) {
            case 0: return w + w * w * w / 3;
            case 1: return 1 + w * w;
            case 2: return 2 * w;
            default: return partials.size() == 3 ? 2.0 : 0.0;
            }
        }
        return partials.empty() ? w : partials.size() == 1 ? 1.0 : 0.0;
    };
    return v;
}

}  // namespace

TEST(Restart, CupAndBallValues) {
    auto c = corpus_case("cup_and_ball");
    ASSERT_TRUE(c.result.good());
    const Model& m = c.model;
    std::map<VarKey, double> left{{L(m, "x"), 0.6}, {L(m, "y"), -0.8}, {L(m, "der(x)"), 1.0}, {L(m, "der(y)"), 0.5}};
    auto sol = solve_restart_numeric(*c.result.restart, left);
    EXPECT_NEAR(sol.at(down(parse_var(m, "lambda"))), 0.2, 1e-12);
    EXPECT_NEAR(sol.at(R(m, "der(x)")), 0.88, 1e-12);
    EXPECT_NEAR(sol.at(R(m, "der(y)")), 0.66, 1e-12);
    EXPECT_NEAR(sol.at(R(m, "x")), 0.6, 1e-12);
    EXPECT_NEAR(sol.at(R(m, "y")), -0.8, 1e-12);
}

// Random impacts on the circle: the restart satisfies the new mode's
// consistency equations and angular momentum is preserved.
TEST(Restart, CupAndBallInvariants) {
    auto c = corpus_case("cup_and_ball");
    const Model& m = c.model;
    const auto& rs = *c.result.restart;
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> angle(0, 2 * std::numbers::pi), vel(-3, 3);
    // x*e2 - y*e1 written out in array variables
    Expr combo = parse_expr(m, "x*(der(y,2) + lambda*y + g) - y*(der(x,2) + lambda*x)");
    for (int i = 0; i < 100; ++i) {
        double th = angle(rng);
        std::map<VarKey, double> left{{L(m, "x"), std::cos(th)}, {L(m, "y"), std::sin(th)},
                                      {L(m, "der(x)"), vel(rng)}, {L(m, "der(y)"), vel(rng)}};
        auto sol = solve_restart_numeric(rs, left);
        EXPECT_LT(consistency_residual(c.result, left, sol), 1e-9);
        EXPECT_NEAR(eval_at(m, "right(x)^2 + right(y)^2", left, sol), 1.0, 1e-9);
        auto inv = check_invariant_preservation(c.result.array, rs, {combo}, c.result.solution.mu, sol, left);
        EXPECT_LT(inv.max_residual, 1e-9);
        double by_hand = eval_at(m, "left(x)*(right(der(y)) - left(der(y))) - left(y)*(right(der(x)) - left(der(x)))", left, sol);
        EXPECT_NEAR(by_hand, 0.0, 1e-9);
    }
}

TEST(Restart, LambdaOfMomentumIsTheImpulseBalance) {
    auto c = corpus_case("cup_and_ball");
    const Model& m = c.model;
    Expr combo = parse_expr(m, "x*(der(y,2) + lambda*y + g) - y*(der(x,2) + lambda*x)");
    Expr got = lambda_in_restart_names(c.result.array, *c.result.restart, combo, c.result.solution.mu);
    Expr want = parse_expr(m, "left(x)*(right(der(y)) - left(der(y))) - left(y)*(right(der(x)) - left(der(x)))");
    EXPECT_TRUE(same_equation(got, want)) << to_string(got, m.syms);
}

TEST(Restart, ClutchMomentum) {
    auto c = corpus_case("clutch_linear");
    ASSERT_TRUE(c.result.good());
    const Model& m = c.model;
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> U(-10, 10);
    for (int i = 0; i < 100; ++i) {
        double w1 = U(rng), w2 = U(rng);
        std::map<VarKey, double> left{{L(m, "w1"), w1}, {L(m, "w2"), w2}};
        auto sol = solve_restart_numeric(*c.result.restart, left);
        double J1 = 1, J2 = 2;
        double w = (J1 * w1 + J2 * w2) / (J1 + J2);
        EXPECT_NEAR(sol.at(R(m, "w1")), w, 1e-12 * (1 + std::abs(w)));
        EXPECT_NEAR(sol.at(R(m, "w2")), w, 1e-12 * (1 + std::abs(w)));
        EXPECT_LT(consistency_residual(c.result, left, sol), 1e-9);
    }
}

TEST(Restart, NonlinearJunctionConverges) {
    auto c = corpus_case("clutch_nonlinear_velocity");
    ASSERT_TRUE(c.result.good());
    const Model& m = c.model;
    Valuation fn = clutch_functions(m);
    std::mt19937 rng(6);
    std::uniform_real_distribution<double> U(-2, 2);
    for (int i = 0; i < 50; ++i) {
        std::map<VarKey, double> left{{L(m, "w1"), U(rng)}, {L(m, "w2"), U(rng)}};
        auto sol = solve_restart_numeric(*c.result.restart, left, fn);
        double w1 = sol.at(R(m, "w1"));
        EXPECT_NEAR(sol.at(R(m, "w2")), w1 + w1 * w1 * w1 / 3, 1e-9);
        EXPECT_LT(consistency_residual(c.result, left, sol, fn), 1e-9);
    }
}

TEST(Restart, EpsilonConvergence) {
    {
        auto c = corpus_case("cup_and_ball");
        const Model& m = c.model;
        std::map<VarKey, double> left{{L(m, "x"), 0.6}, {L(m, "y"), -0.8}, {L(m, "der(x)"), 1.0}, {L(m, "der(y)"), 0.5}};
        auto sol = solve_restart_numeric(*c.result.restart, left);
        auto rep = epsilon_convergence_check(c.result.array, c.result.matching, c.result.solution, *c.result.restart, sol,
                                             left, {1e-2, 1e-3, 1e-4});
        ASSERT_EQ(rep.points.size(), 3u);
        EXPECT_TRUE(rep.decreasing);
        ASSERT_TRUE(rep.order);
        EXPECT_GT(*rep.order, 0.9);
        EXPECT_LT(rep.points.back().distance, 1e-3);
    }
    {
        auto c = corpus_case("clutch_linear");
        const Model& m = c.model;
        std::map<VarKey, double> left{{L(m, "w1"), 3.0}, {L(m, "w2"), 0.0}};
        auto sol = solve_restart_numeric(*c.result.restart, left);
        auto rep = epsilon_convergence_check(c.result.array, c.result.matching, c.result.solution, *c.result.restart, sol,
                                             left, {1e-1, 1e-2, 1e-3});
        // friction enters at the left limit: w+(eps) = w+ - eps*(a1*w1 + a2*w2)/(J1 + J2)
        // and t1 = J1*(w+(eps) - w1) + eps*a1*w1, so the distance is exactly eps here
        const double J1 = 1, J2 = 2, a1 = 0.5, a2 = 0.25, w1 = 3, w2 = 0;
        for (const auto& p : rep.points) {
            double dw = p.eps * (a1 * w1 + a2 * w2) / (J1 + J2);
            double dt1 = std::abs(p.eps * a1 * w1 - J1 * dw), dt2 = std::abs(p.eps * a2 * w2 - J2 * dw);
            EXPECT_NEAR(p.distance, std::max({dw, dt1, dt2}), 1e-9) << p.eps;
        }
    }
    {
        auto c = corpus_case("cup_and_ball");
        const Model& m = c.model;
        std::map<VarKey, double> left{{L(m, "x"), 0.6}, {L(m, "y"), -0.8}, {L(m, "der(x)"), 1.0}, {L(m, "der(y)"), 0.5}};
        auto sol = solve_restart_numeric(*c.result.restart, left);
        auto rep = epsilon_convergence_check(c.result.array, c.result.matching, c.result.solution, *c.result.restart, sol,
                                             left, {1e-3});
        EXPECT_EQ(rep.points.size(), 1u);
        EXPECT_FALSE(rep.order);
    }
}

TEST(Restart, SkippingRescalingBreaksRuleOne) {
    auto c = corpus_case("cup_and_ball");
    try {
        unrescaled_limit(c.result.array, c.result.matching);
        FAIL() << "expected Rule1Violation";
    } catch (const StructuralError& e) {
        EXPECT_EQ(e.kind, StructuralError::Rule1Violation);
        EXPECT_FALSE(e.cert_equations.empty());
    }
}

TEST(Restart, GoodCasesAreNonsingularAndEpsFree) {
    for (const char* name : {"cup_and_ball", "clutch_linear", "clutch_nonlinear_velocity"}) {
        auto c = corpus_case(name);
        ASSERT_TRUE(c.result.restart) << name;
        const auto& rs = *c.result.restart;
        EXPECT_TRUE(is_nonsingular(rs)) << name;
        EXPECT_EQ(rs.size(), int(rs.unknowns.size())) << name;
        for (const auto& e : rs.equations)
            for (const auto& t : monomial_decompose(e).terms) EXPECT_EQ(t.n, 0) << name;
        // renaming is injective on dependent variables; past ones collapse onto left limits
        std::set<VarKey> targets;
        for (const auto& [from, to] : rs.rename) {
            if (c.result.array.past.count(from)) {
                EXPECT_EQ(to.role, Role::Left) << name;
                continue;
            }
            EXPECT_TRUE(targets.insert(to).second) << name << " " << to_string(to, rs.syms);
        }
    }
}

TEST(Restart, ForcedHeightGivesDiagnosis) {
    auto c = corpus_case("cup_and_ball", 2);
    EXPECT_FALSE(c.result.restart);
    ASSERT_TRUE(c.result.diagnosis);
    const auto& v = c.result.diagnosis->violated;
    EXPECT_TRUE(std::count(v.begin(), v.end(), "39"));
    std::set<VarKey> w39(c.result.solution.w39.begin(), c.result.solution.w39.end());
    EXPECT_EQ(w39, (std::set<VarKey>{parse_var(c.model, "shift(der(x,2),1)"), parse_var(c.model, "shift(der(y,2),1)")}));
    EXPECT_THROW(restart_from_solution(c.result.array, c.result.matching, c.result.solution), StructuralError);
}

TEST(Restart, ExogenousDiagnosisPartition) {
    auto c = corpus_case("cup_and_ball_exogenous");
    ASSERT_TRUE(c.result.diagnosis);
    const auto& d = *c.result.diagnosis;
    std::set<VarKey> all(d.determined.begin(), d.determined.end());
    for (const auto& v : d.undetermined) EXPECT_TRUE(all.insert(v).second);
    const Model& m = c.model;
    EXPECT_TRUE(std::count(d.determined.begin(), d.determined.end(), R(m, "x")));
    EXPECT_TRUE(std::count(d.undetermined.begin(), d.undetermined.end(), R(m, "der(x)")));
}

// ---------------------------------------------------------------------------
// Lambda and offset algebra on random expressions

namespace {

Offsets random_offsets(std::mt19937& rng, const Expr& a, const Expr& b) {
    Offsets mu;
    std::uniform_int_distribution<int> U(0, 3);
    for (const auto& v : variables(a)) mu[v] = U(rng);
    for (const auto& v : variables(b)) mu.emplace(v, U(rng));
    return mu;
}

}  // namespace

TEST(Lambda, OffsetAndLambdaLaws) {
    Symbols s = fixtures::sample_symbols();
    fixtures::ExprOptions opt;
    opt.functions = false;
    opt.max_eps = 2;
    std::mt19937 rng(21);
    int sums = 0;
    for (int i = 0; i < 1000; ++i) {
        Expr f = fixtures::random_expr(rng, s, opt), g = fixtures::random_expr(rng, s, opt);
        if (f.is_zero() || g.is_zero()) continue;
        Offsets mu = random_offsets(rng, f, g);
        int mf = *expr_offset(f, mu), mg = *expr_offset(g, mu);
        // product
        EXPECT_EQ(*expr_offset(f * g, mu), mf + mg);
        EXPECT_EQ(apply_lambda(f * g, mu), apply_lambda(f, mu) * apply_lambda(g, mu));
        // sum
        Expr h = f + g;
        if (!h.is_zero()) {
            EXPECT_LE(*expr_offset(h, mu), std::max(mf, mg));
            if (mf > mg) EXPECT_EQ(apply_lambda(h, mu), apply_lambda(f, mu));
            if (mf == mg && !(apply_lambda(f, mu) + apply_lambda(g, mu)).is_zero()) {
                EXPECT_EQ(apply_lambda(h, mu), apply_lambda(f, mu) + apply_lambda(g, mu));
                ++sums;
            }
        }
        // rescaled expressions have offset 0, and Lambda is idempotent
        EXPECT_EQ(*expr_offset(rescale_expr(f, mf, mu), Offsets{}), 0);
        Expr lf = apply_lambda(f, mu);
        EXPECT_EQ(apply_lambda(lf, mu), lf);
    }
    EXPECT_GT(sums, 50);
}

TEST(Lambda, ZeroOffsetsKeepEpsFreeContent) {
    Symbols s = fixtures::sample_symbols();
    fixtures::ExprOptions opt;
    opt.functions = false;
    std::mt19937 rng(22);
    for (int i = 0; i < 200; ++i) {
        Expr f = fixtures::random_expr(rng, s, opt);
        EXPECT_EQ(apply_lambda(f, Offsets{}), f);
    }
}
