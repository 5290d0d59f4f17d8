#pragma once
// Symbolic kernel: expressions over shifted/differentiated variables,
// parameters, powers of 1/eps and opaque smooth functions.
//
// An Expr is always kept in canonical sum-of-monomials form, so structural
// equality is plain equality of the term vectors.

#include <boost/rational.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mdae {

using Rational = boost::rational<long long>;

inline std::string rational_str(const Rational& r) {
    if (r.denominator() == 1) return std::to_string(r.numerator());
    return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

// Plain: array variable. Left/Right: left limit x- and restart value x+ of
// base^(m). Down: rescaled auxiliary eps^mu * x.
enum class Role : int { Plain = 0, Left = 1, Right = 2, Down = 3 };

struct VarKey {
    int base = 0;
    int m = 0;
    int k = 0;
    Role role = Role::Plain;

    int total_degree() const { return m + k; }
    auto operator<=>(const VarKey&) const = default;
};

inline VarKey var_key(int base, int m = 0, int k = 0) { return VarKey{base, m, k, Role::Plain}; }

// x ~ z: same base, same total degree.
inline bool equivalent(const VarKey& a, const VarKey& b) {
    return a.role == Role::Plain && b.role == Role::Plain && a.base == b.base &&
           a.total_degree() == b.total_degree();
}

struct FunctionInfo {
    std::string name;
    int arity = 1;
    bool builtin = false;
};

struct ParamInfo {
    std::string name;
    Rational value{0};
};

// Names for base variables, parameters and functions, in declaration order.
struct Symbols {
    std::vector<std::string> vars;
    std::vector<ParamInfo> params;
    std::vector<FunctionInfo> funcs;

    Symbols() {
        for (const char* b : {"sin", "cos", "exp", "log", "sqrt"}) funcs.push_back({b, 1, true});
    }

    static int find(const std::vector<std::string>& v, const std::string& n) {
        auto it = std::find(v.begin(), v.end(), n);
        return it == v.end() ? -1 : int(it - v.begin());
    }
    int var_id(const std::string& n) const { return find(vars, n); }
    int param_id(const std::string& n) const {
        for (size_t i = 0; i < params.size(); ++i)
            if (params[i].name == n) return int(i);
        return -1;
    }
    int func_id(const std::string& n) const {
        for (size_t i = 0; i < funcs.size(); ++i)
            if (funcs[i].name == n) return int(i);
        return -1;
    }
    int add_var(const std::string& n) {
        if (int i = var_id(n); i >= 0) return i;
        vars.push_back(n);
        return int(vars.size()) - 1;
    }
};

struct FuncApp;

struct Atom {
    enum Kind : int { Var = 0, Param = 1, Func = 2 };
    Kind kind = Var;
    VarKey var{};
    int param = -1;
    std::shared_ptr<const FuncApp> func;
};

struct Monomial {
    int eps = 0;  // exponent n of the factor eps^(-n); negative n is a positive power of eps
    std::vector<std::pair<Atom, int>> factors;  // sorted atoms, multiplicity >= 1
};

struct Term {
    Monomial mono;
    Rational coef{1};
};

class Expr;
int compare(const Expr& a, const Expr& b);

class Expr {
public:
    Expr() = default;
    Expr(long long c) { if (c != 0) terms_.push_back(Term{Monomial{}, Rational(c)}); }
    Expr(const Rational& c) { if (c != Rational(0)) terms_.push_back(Term{Monomial{}, c}); }

    static Expr variable(const VarKey& v);
    static Expr variable(int base, int m = 0, int k = 0) { return variable(var_key(base, m, k)); }
    static Expr parameter(int id);
    // eps^(-n)
    static Expr eps_power(int n);
    static Expr apply(int fid, std::vector<Expr> args, std::vector<int> partials = {});
    static Expr from_terms(std::vector<Term> t);

    const std::vector<Term>& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }
    std::optional<Rational> constant_value() const {
        if (terms_.empty()) return Rational(0);
        if (terms_.size() == 1 && terms_[0].mono.factors.empty() && terms_[0].mono.eps == 0)
            return terms_[0].coef;
        return std::nullopt;
    }

    friend Expr operator+(const Expr& a, const Expr& b);
    friend Expr operator-(const Expr& a, const Expr& b);
    friend Expr operator*(const Expr& a, const Expr& b);
    friend Expr operator-(const Expr& a);
    Expr& operator+=(const Expr& o) { return *this = *this + o; }
    Expr& operator-=(const Expr& o) { return *this = *this - o; }
    Expr& operator*=(const Expr& o) { return *this = *this * o; }

    friend bool operator==(const Expr& a, const Expr& b) { return compare(a, b) == 0; }
    friend bool operator<(const Expr& a, const Expr& b) { return compare(a, b) < 0; }

private:
    std::vector<Term> terms_;
};

struct FuncApp {
    int fid = 0;
    std::vector<int> partials;  // sorted argument indices of the partial derivative
    std::vector<Expr> args;
};

// ---------------------------------------------------------------------------
// ordering

inline int compare_var(const VarKey& a, const VarKey& b) {
    if (a < b) return -1;
    if (b < a) return 1;
    return 0;
}

inline int compare(const Atom& a, const Atom& b) {
    if (a.kind != b.kind) return a.kind < b.kind ? -1 : 1;
    switch (a.kind) {
    case Atom::Var: return compare_var(a.var, b.var);
    case Atom::Param: return a.param == b.param ? 0 : (a.param < b.param ? -1 : 1);
    case Atom::Func: {
        const FuncApp& f = *a.func;
        const FuncApp& g = *b.func;
        if (f.fid != g.fid) return f.fid < g.fid ? -1 : 1;
        if (f.partials != g.partials) return f.partials < g.partials ? -1 : 1;
        if (f.args.size() != g.args.size()) return f.args.size() < g.args.size() ? -1 : 1;
        for (size_t i = 0; i < f.args.size(); ++i)
            if (int c = compare(f.args[i], g.args[i])) return c;
        return 0;
    }
    }
    return 0;
}

inline int compare(const Monomial& a, const Monomial& b) {
    size_t n = std::min(a.factors.size(), b.factors.size());
    for (size_t i = 0; i < n; ++i) {
        if (int c = compare(a.factors[i].first, b.factors[i].first)) return c;
        if (a.factors[i].second != b.factors[i].second)
            return a.factors[i].second > b.factors[i].second ? -1 : 1;
    }
    if (a.factors.size() != b.factors.size()) return a.factors.size() > b.factors.size() ? -1 : 1;
    if (a.eps != b.eps) return a.eps > b.eps ? -1 : 1;
    return 0;
}

inline int compare(const Expr& a, const Expr& b) {
    const auto& x = a.terms();
    const auto& y = b.terms();
    size_t n = std::min(x.size(), y.size());
    for (size_t i = 0; i < n; ++i) {
        if (int c = compare(x[i].mono, y[i].mono)) return c;
        if (x[i].coef != y[i].coef) return x[i].coef < y[i].coef ? -1 : 1;
    }
    if (x.size() != y.size()) return x.size() < y.size() ? -1 : 1;
    return 0;
}

struct MonoLess {
    bool operator()(const Monomial& a, const Monomial& b) const { return compare(a, b) < 0; }
};
struct AtomLess {
    bool operator()(const Atom& a, const Atom& b) const { return compare(a, b) < 0; }
};

// ---------------------------------------------------------------------------
// construction and arithmetic

inline Expr Expr::from_terms(std::vector<Term> t) {
    std::map<Monomial, Rational, MonoLess> acc;
    for (auto& term : t) {
        if (term.coef == Rational(0)) continue;
        auto [it, fresh] = acc.emplace(std::move(term.mono), term.coef);
        if (!fresh) it->second += term.coef;
    }
    Expr e;
    for (auto& [mono, c] : acc)
        if (c != Rational(0)) e.terms_.push_back(Term{mono, c});
    return e;
}

inline Expr Expr::variable(const VarKey& v) {
    Atom a;
    a.kind = Atom::Var;
    a.var = v;
    Expr e;
    e.terms_.push_back(Term{Monomial{0, {{a, 1}}}, Rational(1)});
    return e;
}

inline Expr Expr::parameter(int id) {
    Atom a;
    a.kind = Atom::Param;
    a.param = id;
    Expr e;
    e.terms_.push_back(Term{Monomial{0, {{a, 1}}}, Rational(1)});
    return e;
}

inline Expr Expr::eps_power(int n) {
    Expr e;
    e.terms_.push_back(Term{Monomial{n, {}}, Rational(1)});
    return e;
}

inline Expr Expr::apply(int fid, std::vector<Expr> args, std::vector<int> partials) {
    std::sort(partials.begin(), partials.end());
    auto f = std::make_shared<FuncApp>();
    f->fid = fid;
    f->partials = std::move(partials);
    f->args = std::move(args);
    Atom a;
    a.kind = Atom::Func;
    a.func = std::move(f);
    Expr e;
    e.terms_.push_back(Term{Monomial{0, {{a, 1}}}, Rational(1)});
    return e;
}

inline Monomial multiply(const Monomial& a, const Monomial& b) {
    Monomial r;
    r.eps = a.eps + b.eps;
    size_t i = 0, j = 0;
    while (i < a.factors.size() || j < b.factors.size()) {
        if (j == b.factors.size()) {
            r.factors.push_back(a.factors[i++]);
        } else if (i == a.factors.size()) {
            r.factors.push_back(b.factors[j++]);
        } else {
            int c = compare(a.factors[i].first, b.factors[j].first);
            if (c < 0) {
                r.factors.push_back(a.factors[i++]);
            } else if (c > 0) {
                r.factors.push_back(b.factors[j++]);
            } else {
                r.factors.push_back({a.factors[i].first, a.factors[i].second + b.factors[j].second});
                ++i;
                ++j;
            }
        }
    }
    return r;
}

inline Expr operator+(const Expr& a, const Expr& b) {
    std::vector<Term> t = a.terms_;
    t.insert(t.end(), b.terms_.begin(), b.terms_.end());
    return Expr::from_terms(std::move(t));
}

inline Expr operator-(const Expr& a) {
    Expr r = a;
    for (auto& t : r.terms_) t.coef = -t.coef;
    return r;
}

inline Expr operator-(const Expr& a, const Expr& b) { return a + (-b); }

inline Expr operator*(const Expr& a, const Expr& b) {
    std::vector<Term> t;
    t.reserve(a.terms_.size() * b.terms_.size());
    for (const auto& x : a.terms_)
        for (const auto& y : b.terms_) t.push_back(Term{multiply(x.mono, y.mono), x.coef * y.coef});
    return Expr::from_terms(std::move(t));
}

inline Expr pow(const Expr& e, int n) {
    if (n < 0) throw std::invalid_argument("negative integer power");
    Expr r(1);
    for (int i = 0; i < n; ++i) r = r * e;
    return r;
}

inline Expr from_monomial(const Monomial& m, const Rational& c) {
    return Expr::from_terms({Term{m, c}});
}

// Expressions are kept canonical; normalize only exists for API symmetry.
inline Expr normalize(const Expr& e) { return Expr::from_terms(e.terms()); }

// ---------------------------------------------------------------------------
// traversal

template <class F>
void for_each_atom(const Expr& e, F&& fn) {
    for (const auto& t : e.terms())
        for (const auto& [a, p] : t.mono.factors) {
            fn(a, p);
            if (a.kind == Atom::Func)
                for (const auto& arg : a.func->args) for_each_atom(arg, fn);
        }
}

inline std::set<VarKey> variables(const Expr& e) {
    std::set<VarKey> s;
    for_each_atom(e, [&](const Atom& a, int) {
        if (a.kind == Atom::Var) s.insert(a.var);
    });
    return s;
}

inline bool has_eps(const Expr& e) {
    bool found = false;
    std::function<void(const Expr&)> rec = [&](const Expr& x) {
        for (const auto& t : x.terms()) {
            if (t.mono.eps != 0) found = true;
            for (const auto& [a, p] : t.mono.factors)
                if (a.kind == Atom::Func)
                    for (const auto& arg : a.func->args) rec(arg);
        }
    };
    rec(e);
    return found;
}

// Rebuild e with every atom replaced by fn(atom) (an Expr).
template <class F>
Expr map_atoms(const Expr& e, F&& fn) {
    Expr r;
    for (const auto& t : e.terms()) {
        Expr prod = from_monomial(Monomial{t.mono.eps, {}}, t.coef);
        for (const auto& [a, p] : t.mono.factors) prod = prod * pow(fn(a), p);
        r += prod;
    }
    return r;
}

inline Expr map_vars(const Expr& e, const std::function<Expr(const VarKey&)>& fn) {
    std::function<Expr(const Atom&)> atom_fn;
    atom_fn = [&](const Atom& a) -> Expr {
        if (a.kind == Atom::Var) return fn(a.var);
        if (a.kind == Atom::Param) return Expr::parameter(a.param);
        std::vector<Expr> args;
        for (const auto& arg : a.func->args) args.push_back(map_atoms(arg, atom_fn));
        return Expr::apply(a.func->fid, std::move(args), a.func->partials);
    };
    return map_atoms(e, atom_fn);
}

inline Expr substitute(const Expr& e, const std::map<VarKey, Expr>& sub) {
    return map_vars(e, [&](const VarKey& v) {
        auto it = sub.find(v);
        return it == sub.end() ? Expr::variable(v) : it->second;
    });
}

inline Expr shift(const Expr& e, int k) {
    if (k == 0) return e;
    return map_vars(e, [&](const VarKey& v) {
        VarKey w = v;
        w.k += k;
        return Expr::variable(w);
    });
}

// ---------------------------------------------------------------------------
// differentiation

inline Expr differentiate(const Expr& e);

inline Expr differentiate_atom(const Atom& a) {
    switch (a.kind) {
    case Atom::Var: {
        VarKey v = a.var;
        v.m += 1;
        return Expr::variable(v);
    }
    case Atom::Param: return Expr();
    case Atom::Func: {
        Expr r;
        const FuncApp& f = *a.func;
        for (size_t j = 0; j < f.args.size(); ++j) {
            Expr da = differentiate(f.args[j]);
            if (da.is_zero()) continue;
            std::vector<int> p = f.partials;
            p.push_back(int(j));
            r += Expr::apply(f.fid, f.args, p) * da;
        }
        return r;
    }
    }
    return Expr();
}

// Product rule over the factors of each monomial; eps powers are constants.
inline Expr differentiate(const Expr& e) {
    Expr r;
    for (const auto& t : e.terms()) {
        const auto& fs = t.mono.factors;
        for (size_t i = 0; i < fs.size(); ++i) {
            Expr da = differentiate_atom(fs[i].first);
            if (da.is_zero()) continue;
            Monomial rest{t.mono.eps, {}};
            for (size_t j = 0; j < fs.size(); ++j) {
                int p = fs[j].second - (i == j ? 1 : 0);
                if (p > 0) rest.factors.push_back({fs[j].first, p});
            }
            r += from_monomial(rest, t.coef * Rational(fs[i].second)) * da;
        }
    }
    return r;
}

inline Expr differentiate(const Expr& e, int times) {
    Expr r = e;
    for (int i = 0; i < times; ++i) r = differentiate(r);
    return r;
}

inline Expr partial_derivative(const Expr& e, const VarKey& v);

inline Expr partial_atom(const Atom& a, const VarKey& v) {
    if (a.kind == Atom::Var) return a.var == v ? Expr(1) : Expr();
    if (a.kind == Atom::Param) return Expr();
    Expr r;
    const FuncApp& f = *a.func;
    for (size_t j = 0; j < f.args.size(); ++j) {
        Expr da = partial_derivative(f.args[j], v);
        if (da.is_zero()) continue;
        std::vector<int> p = f.partials;
        p.push_back(int(j));
        r += Expr::apply(f.fid, f.args, p) * da;
    }
    return r;
}

inline Expr partial_derivative(const Expr& e, const VarKey& v) {
    Expr r;
    for (const auto& t : e.terms()) {
        const auto& fs = t.mono.factors;
        for (size_t i = 0; i < fs.size(); ++i) {
            Expr da = partial_atom(fs[i].first, v);
            if (da.is_zero()) continue;
            Monomial rest{t.mono.eps, {}};
            for (size_t j = 0; j < fs.size(); ++j) {
                int p = fs[j].second - (i == j ? 1 : 0);
                if (p > 0) rest.factors.push_back({fs[j].first, p});
            }
            r += from_monomial(rest, t.coef * Rational(fs[i].second)) * da;
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// comparison up to a constant factor

// c with a = c*b, if such a nonzero rational exists.
inline std::optional<Rational> equal_up_to_constant(const Expr& a, const Expr& b) {
    const auto& x = a.terms();
    const auto& y = b.terms();
    if (x.size() != y.size()) return std::nullopt;
    if (x.empty()) return Rational(1);
    Rational c = x[0].coef / y[0].coef;
    for (size_t i = 0; i < x.size(); ++i) {
        if (compare(x[i].mono, y[i].mono) != 0) return std::nullopt;
        if (x[i].coef != c * y[i].coef) return std::nullopt;
    }
    return c;
}

// Scale an equation 0 = e so that its first term has coefficient 1.
inline Expr equation_form(const Expr& e) {
    if (e.is_zero()) return e;
    return e * Expr(Rational(1) / e.terms()[0].coef);
}

// ---------------------------------------------------------------------------
// monomial decomposition

struct OpaqueFactor {
    Atom atom;
    std::set<VarKey> args;
};

struct MonomialTerm {
    int n = 0;  // exponent of eps^(-n)
    std::vector<std::pair<VarKey, int>> vars;
    std::vector<std::pair<int, int>> params;
    std::vector<OpaqueFactor> opaque;
    Rational coef{1};

    int multiplicity(const VarKey& v) const {
        for (const auto& [w, p] : vars)
            if (w == v) return p;
        return 0;
    }
    bool opaque_depends_on(const VarKey& v) const {
        for (const auto& o : opaque)
            if (o.args.count(v)) return true;
        return false;
    }
    bool contains(const VarKey& v) const { return multiplicity(v) > 0 || opaque_depends_on(v); }
};

struct MonomialForm {
    std::vector<MonomialTerm> terms;

    std::set<VarKey> lin() const {
        std::set<VarKey> s;
        for (const auto& t : terms)
            for (const auto& [v, p] : t.vars)
                if (p == 1 && !t.opaque_depends_on(v)) s.insert(v);
        return s;
    }
};

inline MonomialForm monomial_decompose(const Expr& e) {
    MonomialForm f;
    for (const auto& t : e.terms()) {
        MonomialTerm mt;
        mt.n = t.mono.eps;
        mt.coef = t.coef;
        for (const auto& [a, p] : t.mono.factors) {
            if (a.kind == Atom::Var) {
                mt.vars.push_back({a.var, p});
            } else if (a.kind == Atom::Param) {
                mt.params.push_back({a.param, p});
            } else {
                Expr single = from_monomial(Monomial{0, {{a, 1}}}, Rational(1));
                for (int i = 0; i < p; ++i) mt.opaque.push_back({a, variables(single)});
            }
        }
        f.terms.push_back(std::move(mt));
    }
    return f;
}

inline Expr reassemble(const MonomialForm& f) {
    std::vector<Term> ts;
    for (const auto& mt : f.terms) {
        Monomial m;
        m.eps = mt.n;
        Expr prod = from_monomial(m, mt.coef);
        for (const auto& [v, p] : mt.vars) prod = prod * pow(Expr::variable(v), p);
        for (const auto& [id, p] : mt.params) prod = prod * pow(Expr::parameter(id), p);
        for (const auto& o : mt.opaque) prod = prod * from_monomial(Monomial{0, {{o.atom, 1}}}, Rational(1));
        for (const auto& t : prod.terms()) ts.push_back(t);
    }
    return Expr::from_terms(std::move(ts));
}

// ---------------------------------------------------------------------------
// numeric evaluation

struct EvalError : std::runtime_error {
    enum Kind { MissingVariable, EpsilonSingularity, UnboundFunction, Domain };
    Kind kind;
    EvalError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

// User-supplied implementation of an opaque function (or one of its partials).
using FunctionBinding =
    std::function<double(int fid, const std::vector<int>& partials, const std::vector<double>& args)>;

struct Valuation {
    std::map<VarKey, double> vars;
    std::map<int, double> params;  // overrides of model parameter values
    FunctionBinding functions;
};

inline double builtin_value(const std::string& name, int order, double x) {
    const double half_pi = std::numbers::pi / 2;
    if (name == "sin") return std::sin(x + order * half_pi);
    if (name == "cos") return std::cos(x + order * half_pi);
    if (name == "exp") return std::exp(x);
    if (name == "log") {
        if (x <= 0) throw EvalError(EvalError::Domain, "log of non-positive value");
        if (order == 0) return std::log(x);
        double fact = 1;
        for (int i = 2; i < order; ++i) fact *= i;
        return ((order % 2) ? 1.0 : -1.0) * fact / std::pow(x, order);
    }
    if (name == "sqrt") {
        if (x < 0) throw EvalError(EvalError::Domain, "sqrt of negative value");
        double c = 1;
        for (int j = 0; j < order; ++j) c *= 0.5 - j;
        return c * std::pow(x, 0.5 - order);
    }
    throw EvalError(EvalError::UnboundFunction, "unknown builtin " + name);
}

inline double evaluate(const Expr& e, const Valuation& val, double eps, const Symbols& syms);

inline double evaluate_atom(const Atom& a, const Valuation& val, double eps, const Symbols& syms) {
    switch (a.kind) {
    case Atom::Var: {
        auto it = val.vars.find(a.var);
        if (it == val.vars.end()) throw EvalError(EvalError::MissingVariable, "missing variable value");
        return it->second;
    }
    case Atom::Param: {
        auto it = val.params.find(a.param);
        if (it != val.params.end()) return it->second;
        return boost::rational_cast<double>(syms.params.at(a.param).value);
    }
    case Atom::Func: {
        const FuncApp& f = *a.func;
        std::vector<double> args;
        for (const auto& arg : f.args) args.push_back(evaluate(arg, val, eps, syms));
        const FunctionInfo& info = syms.funcs.at(f.fid);
        if (info.builtin) return builtin_value(info.name, int(f.partials.size()), args.at(0));
        if (!val.functions) throw EvalError(EvalError::UnboundFunction, "no binding for function " + info.name);
        return val.functions(f.fid, f.partials, args);
    }
    }
    return 0;
}

inline double evaluate(const Expr& e, const Valuation& val, double eps, const Symbols& syms) {
    double sum = 0;
    for (const auto& t : e.terms()) {
        double v = boost::rational_cast<double>(t.coef);
        if (t.mono.eps != 0) {
            if (eps == 0) {
                if (t.mono.eps > 0) throw EvalError(EvalError::EpsilonSingularity, "negative power of eps at eps = 0");
                continue;
            }
            v *= std::pow(eps, -t.mono.eps);
        }
        for (const auto& [a, p] : t.mono.factors) v *= std::pow(evaluate_atom(a, val, eps, syms), p);
        sum += v;
    }
    return sum;
}

// ---------------------------------------------------------------------------
// printing (the output re-parses with the model grammar)

inline std::string var_core(const Symbols& s, int base, int m) {
    const std::string& n = s.vars.at(base);
    if (m == 0) return n;
    if (m == 1) return "der(" + n + ")";
    return "der(" + n + "," + std::to_string(m) + ")";
}

inline std::string to_string(const VarKey& v, const Symbols& s) {
    std::string core = var_core(s, v.base, v.m);
    switch (v.role) {
    case Role::Left: return "left(" + core + ")";
    case Role::Right: return "right(" + core + ")";
    case Role::Down: {
        VarKey p = v;
        p.role = Role::Plain;
        return "down(" + to_string(p, s) + ")";
    }
    case Role::Plain: break;
    }
    if (v.k == 0) return core;
    return "shift(" + core + "," + std::to_string(v.k) + ")";
}

std::string to_string(const Expr& e, const Symbols& s);

inline std::string func_name(const FuncApp& f, const Symbols& s) {
    const FunctionInfo& info = s.funcs.at(f.fid);
    std::string n = info.name;
    for (int p : f.partials) {
        n += "'";
        if (info.arity > 1) n += std::to_string(p + 1);
    }
    return n;
}

inline std::string atom_string(const Atom& a, const Symbols& s) {
    switch (a.kind) {
    case Atom::Var: return to_string(a.var, s);
    case Atom::Param: return s.params.at(a.param).name;
    case Atom::Func: {
        std::string r = func_name(*a.func, s) + "(";
        for (size_t i = 0; i < a.func->args.size(); ++i) {
            if (i) r += ", ";
            r += to_string(a.func->args[i], s);
        }
        return r + ")";
    }
    }
    return "?";
}

inline std::string to_string(const Expr& e, const Symbols& s) {
    if (e.is_zero()) return "0";
    std::string out;
    bool first = true;
    for (const auto& t : e.terms()) {
        Rational c = t.coef;
        bool neg = c < Rational(0);
        if (neg) c = -c;
        if (first)
            out += neg ? "-" : "";
        else
            out += neg ? " - " : " + ";
        first = false;
        std::vector<std::string> parts;
        bool unit = (c == Rational(1));
        if (!unit || (t.mono.factors.empty() && t.mono.eps == 0)) parts.push_back(rational_str(c));
        if (t.mono.eps != 0) parts.push_back(t.mono.eps == -1 ? "eps" : "eps^" + std::to_string(-t.mono.eps));
        for (const auto& [a, p] : t.mono.factors) {
            std::string as = atom_string(a, s);
            parts.push_back(p == 1 ? as : as + "^" + std::to_string(p));
        }
        for (size_t i = 0; i < parts.size(); ++i) {
            if (i) out += "*";
            out += parts[i];
        }
    }
    return out;
}

}  // namespace mdae
