#include "mdae/model.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace mdae;

namespace {

Model load(const std::string& name) { return load_model(std::string(MDAE_CORPUS_DIR) + "/" + name + "/model.mdae"); }

int index_of(const std::vector<std::string>& v, const std::string& s) {
    return int(std::find(v.begin(), v.end(), s) - v.begin());
}

struct Random {
    DAESystem sys;
    Symbols syms;
    SignatureMatrix w;
};

Random random_system(std::mt19937& rng, int n) {
    Random r;
    for (int j = 0; j < n; ++j) r.syms.add_var("v" + std::to_string(j));
    std::bernoulli_distribution edge(0.45);
    std::uniform_int_distribution<int> ord(0, 2);
    r.w.assign(n, std::vector<std::optional<long long>>(n));
    for (int i = 0; i < n; ++i) {
        Expr e;
        for (int j = 0; j < n; ++j)
            if (edge(rng) || i == j) {
                int s = ord(rng);
                r.w[i][j] = s;
                e += Expr::variable(j, s) * Expr::variable(j, 0) + Expr::variable(j, s);
            }
        r.sys.labels.push_back("f" + std::to_string(i));
        r.sys.equations.push_back(e);
    }
    for (int j = 0; j < n; ++j) r.sys.vars.push_back(j);
    return r;
}

// Smallest valid equation offsets by exhaustive search over {0..B}^n.
std::optional<std::vector<int>> brute_offsets(const SignatureMatrix& w, int B) {
    const int n = int(w.size());
    auto value = assignment_value(w);
    if (!value) return std::nullopt;
    std::vector<std::vector<int>> valid;
    std::vector<int> c(n, 0);
    std::function<void(int)> rec = [&](int i) {
        if (i == n) {
            // d_j = max_i sigma_ij + c_i; valid iff sum d - sum c equals the optimal value
            long long sd = 0, sc = 0;
            for (int j = 0; j < n; ++j) {
                long long d = LLONG_MIN;
                for (int k = 0; k < n; ++k)
                    if (w[k][j]) d = std::max(d, *w[k][j] + c[k]);
                sd += d;
            }
            for (int k = 0; k < n; ++k) sc += c[k];
            if (sd - sc != *value) return;
            valid.push_back(c);
            return;
        }
        for (int v = 0; v <= B; ++v) {
            c[i] = v;
            rec(i + 1);
        }
    };
    rec(0);
    if (valid.empty()) return std::nullopt;
    // valid offsets form a lattice: the componentwise minimum is itself valid
    std::vector<int> lo = valid[0];
    for (const auto& v : valid)
        for (int k = 0; k < n; ++k) lo[k] = std::min(lo[k], v[k]);
    EXPECT_NE(std::find(valid.begin(), valid.end(), lo), valid.end());
    return lo;
}

}  // namespace

TEST(Sigma, CupAndBallStraight) {
    Model m = load("cup_and_ball");
    DAESystem s = m.mode("straight")->system();
    SigmaOffsets o = solve_sigma(s, m.syms);
    EXPECT_EQ(o.c[index_of(s.labels, "e1")], 0);
    EXPECT_EQ(o.c[index_of(s.labels, "e2")], 0);
    EXPECT_EQ(o.c[index_of(s.labels, "k1")], 2);
    std::map<std::string, int> d;
    for (size_t j = 0; j < s.vars.size(); ++j) d[m.syms.vars[s.vars[j]]] = o.d[j];
    EXPECT_EQ(d, (std::map<std::string, int>{{"x", 2}, {"y", 2}, {"lambda", 0}}));
}

TEST(Sigma, LatentEquationsAndLeadingVariables) {
    Model m = load("cup_and_ball");
    DAESystem s = m.mode("straight")->system();
    CompletedSystem cs = complete(s, solve_sigma(s, m.syms));
    std::set<std::pair<std::string, int>> latent;
    for (const auto& r : cs.completion())
        if (r.m > 0) latent.insert({s.labels[r.eq], r.m});
    EXPECT_EQ(latent, (std::set<std::pair<std::string, int>>{{"k1", 1}, {"k1", 2}}));
    std::set<VarKey> leading;
    for (const auto& [j, d] : cs.leading_match) leading.insert(var_key(s.vars[j], d));
    EXPECT_EQ(leading, (std::set<VarKey>{var_key(m.syms.var_id("x"), 2), var_key(m.syms.var_id("y"), 2),
                                          var_key(m.syms.var_id("lambda"), 0)}));
    EXPECT_EQ(cs.consistency.size(), 2u);  // k1 and der(k1)
}

TEST(Sigma, CircuitMinimalSolution) {
    Model m = load("switched_circuit");
    DAESystem s = m.mode("on")->system();
    SigmaOffsets o = solve_sigma(s, m.syms);
    std::map<std::string, int> c, d;
    for (int f = 0; f < s.size(); ++f) c[s.labels[f]] = o.c[f];
    for (size_t j = 0; j < s.vars.size(); ++j) d[m.syms.vars[s.vars[j]]] = o.d[j];
    EXPECT_EQ(c["f1"], 1);
    EXPECT_EQ(c["f2"], 0);
    EXPECT_EQ(c["f3"], 0);
    EXPECT_EQ(c["f4"], 2);
    EXPECT_EQ(d["i"], 1);
    EXPECT_EQ(d["v1"], 2);
    EXPECT_EQ(d["v2"], 1);
    EXPECT_EQ(d["vR"], 0);
}

TEST(Sigma, OffsetsAreTheSmallestValidOnes) {
    std::mt19937 rng(17);
    int checked = 0;
    for (int trial = 0; trial < 200; ++trial) {
        auto r = random_system(rng, 2 + trial % 3);
        auto brute = brute_offsets(r.w, 4);
        SigmaOffsets o;
        try {
            o = solve_sigma(r.sys, r.syms);
        } catch (const StructuralError&) {
            EXPECT_FALSE(brute.has_value());
            continue;
        }
        if (!brute) continue;  // offsets beyond the search box
        EXPECT_EQ(o.c, *brute) << trial;
        // d_j - c_i >= sigma_ij everywhere, equality on the matching
        for (int i = 0; i < r.sys.size(); ++i)
            for (int j = 0; j < r.sys.size(); ++j)
                if (r.w[i][j]) EXPECT_GE(o.d[j] - o.c[i], *r.w[i][j]);
        for (int i = 0; i < r.sys.size(); ++i) EXPECT_EQ(o.d[o.match[i]] - o.c[i], *r.w[i][o.match[i]]);
        ++checked;
    }
    EXPECT_GT(checked, 100);
}

TEST(Sigma, SingularSystemCarriesCertificate) {
    Model m = parse_model("model s\nvar x, y;\nmode a { eq f: x = 0; eq g: 2*x = 1; }\n");
    DAESystem s = m.mode("a")->system();
    s.vars = {0, 1};
    try {
        solve_sigma(s, m.syms);
        FAIL() << "expected a structural error";
    } catch (const StructuralError& e) {
        EXPECT_EQ(e.kind, StructuralError::StructurallySingular);
        EXPECT_FALSE(e.cert_equations.empty());
        EXPECT_FALSE(e.cert_variables.empty());
    }
}
