#pragma once
// Textual model format: parsing, printing and validation.
//
//   model NAME
//   param NAME = RATIONAL;
//   var a, b, c;
//   function g(2);
//   mode NAME { eq LABEL: EXPR = EXPR; ... }
//   transition A -> B on up(EXPR) [fact EXPR;]* ;
//   transition A -> B exogenous;

#include "mdae/error.hpp"
#include "mdae/expr.hpp"
#include "mdae/sigma.hpp"

#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mdae {

struct ParseError : std::runtime_error {
    int line, col;
    ParseError(int l, int c, const std::string& msg)
        : std::runtime_error(std::to_string(l) + ":" + std::to_string(c) + ": " + msg), line(l), col(c) {}
};

struct Equation {
    std::string label;
    Expr expr;  // 0 = lhs - rhs
};

struct Mode {
    std::string name;
    std::vector<Equation> equations;

    // Base variables occurring in the mode, in declaration order.
    std::vector<int> variables() const {
        std::set<int> s;
        for (const auto& e : equations)
            for (const auto& v : mdae::variables(e.expr)) s.insert(v.base);
        return {s.begin(), s.end()};
    }
    DAESystem system() const {
        DAESystem d;
        for (const auto& e : equations) {
            d.labels.push_back(e.label);
            d.equations.push_back(e.expr);
        }
        d.vars = variables();
        return d;
    }
};

struct Transition {
    std::string from, to;
    std::optional<Expr> guard;  // zero-crossing; absent for exogenous switches
    std::vector<Expr> facts;    // explicit fact annotations
};

struct Model {
    std::string name;
    Symbols syms;
    std::vector<Mode> modes;
    std::vector<Transition> transitions;

    const Mode* mode(const std::string& n) const {
        for (const auto& m : modes)
            if (m.name == n) return &m;
        return nullptr;
    }
    const Transition* transition(const std::string& a, const std::string& b) const {
        for (const auto& t : transitions)
            if (t.from == a && t.to == b) return &t;
        return nullptr;
    }
};

// ---------------------------------------------------------------------------
// lexer

namespace parse_detail {

struct Token {
    enum Kind { Ident, Number, Punct, End } kind = End;
    std::string text;
    int line = 1, col = 1;
};

inline std::vector<Token> lex(const std::string& src) {
    std::vector<Token> out;
    int line = 1, col = 1;
    size_t i = 0;
    auto adv = [&](size_t n = 1) {
        for (size_t j = 0; j < n && i < src.size(); ++j, ++i) {
            if (src[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
    };
    while (i < src.size()) {
        char c = src[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            adv();
            continue;
        }
        if (c == '#' || (c == '/' && i + 1 < src.size() && src[i + 1] == '/')) {
            while (i < src.size() && src[i] != '\n') adv();
            continue;
        }
        Token t;
        t.line = line;
        t.col = col;
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t j = i;
            while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
            while (j < src.size() && src[j] == '\'') {
                ++j;
                while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
            }
            t.kind = Token::Ident;
            t.text = src.substr(i, j - i);
            adv(j - i);
        } else if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && i + 1 < src.size() && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
            size_t j = i;
            while (j < src.size() && (std::isdigit(static_cast<unsigned char>(src[j])) || src[j] == '.')) ++j;
            t.kind = Token::Number;
            t.text = src.substr(i, j - i);
            adv(j - i);
        } else if (c == '-' && i + 1 < src.size() && src[i + 1] == '>') {
            t.kind = Token::Punct;
            t.text = "->";
            adv(2);
        } else if (std::string("+-*/^(),;:={}").find(c) != std::string::npos) {
            t.kind = Token::Punct;
            t.text = std::string(1, c);
            adv();
        } else {
            throw ParseError(line, col, std::string("unexpected character '") + c + "'");
        }
        out.push_back(t);
    }
    Token end;
    end.line = line;
    end.col = col;
    out.push_back(end);
    return out;
}

inline Rational parse_rational(const std::string& s, int line, int col) {
    auto dot = s.find('.');
    if (s.find('.', dot == std::string::npos ? 0 : dot + 1) != std::string::npos && dot != std::string::npos)
        throw ParseError(line, col, "malformed number " + s);
    try {
        if (dot == std::string::npos) return Rational(std::stoll(s));
        std::string ip = s.substr(0, dot), fp = s.substr(dot + 1);
        long long den = 1;
        for (size_t k = 0; k < fp.size(); ++k) den *= 10;
        long long num = (ip.empty() ? 0 : std::stoll(ip)) * den + (fp.empty() ? 0 : std::stoll(fp));
        return Rational(num, den);
    } catch (const std::out_of_range&) {
        throw ParseError(line, col, "number out of range " + s);
    }
}

class Parser {
public:
    Parser(const std::string& src, Model& m) : toks_(lex(src)), model_(m) {}

    void parse_model() {
        if (peek().kind == Token::End) fail(peek(), "empty model");
        expect_word("model");
        model_.name = ident("model name");
        accept(";");
        while (peek().kind != Token::End) {
            const Token& t = peek();
            if (t.kind != Token::Ident) fail(t, "expected a declaration");
            if (t.text == "param") decl_param();
            else if (t.text == "var") decl_var();
            else if (t.text == "function") decl_function();
            else if (t.text == "mode") decl_mode();
            else if (t.text == "transition") decl_transition();
            else fail(t, "unknown declaration '" + t.text + "'");
        }
    }

    Expr parse_standalone_expr() {
        Expr e = expr();
        if (peek().kind != Token::End) fail(peek(), "trailing input");
        return e;
    }

private:
    std::vector<Token> toks_;
    size_t pos_ = 0;
    Model& model_;

    const Token& peek(size_t ahead = 0) const { return toks_[std::min(pos_ + ahead, toks_.size() - 1)]; }
    const Token& next() {
        const Token& t = toks_[pos_];
        if (pos_ + 1 < toks_.size()) ++pos_;
        return t;
    }
    [[noreturn]] void fail(const Token& t, const std::string& msg) const { throw ParseError(t.line, t.col, msg); }
    bool is(const std::string& p) const { return peek().kind != Token::End && peek().text == p && peek().kind != Token::Number; }
    bool accept(const std::string& p) {
        if (is(p)) {
            next();
            return true;
        }
        return false;
    }
    void expect(const std::string& p) {
        if (!accept(p)) fail(peek(), "expected '" + p + "'");
    }
    void expect_word(const std::string& w) {
        if (peek().kind != Token::Ident || peek().text != w) fail(peek(), "expected '" + w + "'");
        next();
    }
    std::string ident(const std::string& what) {
        if (peek().kind != Token::Ident || peek().text.find('\'') != std::string::npos) fail(peek(), "expected " + what);
        return next().text;
    }
    bool taken(const std::string& n) const {
        return n == "eps" || model_.syms.var_id(n) >= 0 || model_.syms.param_id(n) >= 0 || model_.syms.func_id(n) >= 0;
    }
    void fresh(const Token& t, const std::string& n) {
        static const std::set<std::string> reserved{"der", "shift", "left", "right", "down", "eps", "model", "param",
                                                    "var", "function", "mode", "transition", "eq", "on", "up",
                                                    "fact", "exogenous"};
        if (reserved.count(n)) fail(t, "'" + n + "' is reserved");
        if (taken(n)) fail(t, "redeclaration of '" + n + "'");
    }

    Rational signed_number() {
        bool neg = accept("-");
        const Token& t = peek();
        if (t.kind != Token::Number) fail(t, "expected number");
        next();
        Rational r = parse_rational(t.text, t.line, t.col);
        if (accept("/")) {
            const Token& d = peek();
            if (d.kind != Token::Number) fail(d, "expected denominator");
            next();
            Rational den = parse_rational(d.text, d.line, d.col);
            if (den == Rational(0)) fail(d, "division by zero");
            r /= den;
        }
        return neg ? -r : r;
    }

    void decl_param() {
        next();
        const Token& t = peek();
        std::string n = ident("parameter name");
        fresh(t, n);
        expect("=");
        Rational v = signed_number();
        expect(";");
        model_.syms.params.push_back({n, v});
    }
    void decl_var() {
        next();
        do {
            const Token& t = peek();
            std::string n = ident("variable name");
            fresh(t, n);
            model_.syms.vars.push_back(n);
        } while (accept(","));
        expect(";");
    }
    void decl_function() {
        next();
        const Token& t = peek();
        std::string n = ident("function name");
        fresh(t, n);
        expect("(");
        const Token& a = peek();
        if (a.kind != Token::Number) fail(a, "expected arity");
        next();
        int arity = std::stoi(a.text);
        if (arity < 1) fail(a, "arity must be positive");
        expect(")");
        expect(";");
        model_.syms.funcs.push_back({n, arity, false});
    }
    void decl_mode() {
        next();
        const Token& t = peek();
        Mode m;
        m.name = ident("mode name");
        if (model_.mode(m.name)) fail(t, "redeclaration of mode '" + m.name + "'");
        expect("{");
        while (!accept("}")) {
            expect_word("eq");
            Equation e;
            e.label = ident("equation label");
            expect(":");
            Expr lhs = expr();
            expect("=");
            Expr rhs = expr();
            expect(";");
            e.expr = lhs - rhs;
            m.equations.push_back(std::move(e));
        }
        model_.modes.push_back(std::move(m));
    }
    void decl_transition() {
        next();
        Transition tr;
        const Token& a = peek();
        tr.from = ident("mode name");
        if (!model_.mode(tr.from)) fail(a, "unknown mode '" + tr.from + "'");
        expect("->");
        const Token& b = peek();
        tr.to = ident("mode name");
        if (!model_.mode(tr.to)) fail(b, "unknown mode '" + tr.to + "'");
        if (peek().kind == Token::Ident && peek().text == "exogenous") {
            next();
        } else {
            expect_word("on");
            expect_word("up");
            expect("(");
            tr.guard = expr();
            expect(")");
            while (peek().kind == Token::Ident && peek().text == "fact") {
                next();
                tr.facts.push_back(expr());
                expect(";");
            }
        }
        expect(";");
        model_.transitions.push_back(std::move(tr));
    }

    // expressions
    Expr expr() {
        Expr e;
        if (accept("-")) e = -term();
        else {
            accept("+");
            e = term();
        }
        for (;;) {
            if (accept("+")) e += term();
            else if (accept("-")) e -= term();
            else break;
        }
        return e;
    }
    Expr term() {
        Expr e = unary();
        for (;;) {
            if (accept("*")) {
                e *= unary();
            } else if (is("/")) {
                const Token& t = next();
                Expr d = unary();
                auto c = d.constant_value();
                if (!c || *c == Rational(0)) fail(t, "division only by nonzero constants");
                e *= Expr(Rational(1) / *c);
            } else {
                break;
            }
        }
        return e;
    }
    Expr unary() {
        if (accept("-")) return -unary();
        if (accept("+")) return unary();
        return power();
    }
    Expr power() {
        Expr b = primary();
        if (accept("^")) {
            bool neg = accept("-");
            const Token& t = peek();
            if (t.kind != Token::Number || t.text.find('.') != std::string::npos) fail(t, "expected integer exponent");
            next();
            int n = std::stoi(t.text);
            if (neg) {
                const auto& ts = b.terms();
                bool pure_eps = ts.size() == 1 && ts[0].mono.factors.empty() && ts[0].coef == Rational(1) && ts[0].mono.eps != 0;
                if (!pure_eps) fail(t, "negative exponent only allowed on eps");
                return Expr::eps_power(ts[0].mono.eps * -n);
            }
            const auto& ts = b.terms();
            if (ts.size() == 1 && ts[0].mono.factors.empty() && ts[0].coef == Rational(1) && ts[0].mono.eps != 0)
                return Expr::eps_power(ts[0].mono.eps * n);
            return pow(b, n);
        }
        return b;
    }
    int small_int() {
        bool neg = accept("-");
        const Token& t = peek();
        if (t.kind != Token::Number || t.text.find('.') != std::string::npos) fail(t, "expected integer");
        next();
        return neg ? -std::stoi(t.text) : std::stoi(t.text);
    }
    VarKey single_var(const Token& at, const Expr& e, const std::string& what) {
        const auto& ts = e.terms();
        if (ts.size() != 1 || ts[0].coef != Rational(1) || ts[0].mono.eps != 0 || ts[0].mono.factors.size() != 1 ||
            ts[0].mono.factors[0].second != 1 || ts[0].mono.factors[0].first.kind != Atom::Var)
            fail(at, what + " expects a single variable");
        return ts[0].mono.factors[0].first.var;
    }
    Expr primary() {
        const Token& t = peek();
        if (t.kind == Token::Number) {
            next();
            return Expr(parse_rational(t.text, t.line, t.col));
        }
        if (accept("(")) {
            Expr e = expr();
            expect(")");
            return e;
        }
        if (t.kind != Token::Ident) fail(t, "expected expression");
        std::string word = t.text;
        next();
        if (word == "eps") return Expr::eps_power(-1);
        if (word == "der") {
            expect("(");
            Expr e = expr();
            int n = 1;
            if (accept(",")) n = small_int();
            expect(")");
            if (n < 0) fail(t, "negative derivative order");
            if (has_eps(e)) fail(t, "der applied to an expression containing eps");
            return differentiate(e, n);
        }
        if (word == "shift") {
            expect("(");
            Expr e = expr();
            expect(",");
            int k = small_int();
            expect(")");
            return shift(e, k);
        }
        if (word == "left" || word == "right" || word == "down") {
            expect("(");
            Expr e = expr();
            expect(")");
            VarKey v = single_var(t, e, word);
            if (v.role != Role::Plain) fail(t, word + " of a non-plain variable");
            if (word == "down") {
                v.role = Role::Down;
            } else {
                if (v.k != 0) fail(t, word + " of a shifted variable");
                v.role = word == "left" ? Role::Left : Role::Right;
            }
            return Expr::variable(v);
        }
        auto q = word.find('\'');
        std::string name = word.substr(0, q);
        int fid = model_.syms.func_id(name);
        if (fid >= 0) {
            const FunctionInfo& info = model_.syms.funcs[fid];
            std::vector<int> partials;
            while (q != std::string::npos) {
                size_t r = word.find('\'', q + 1);
                std::string digits = word.substr(q + 1, r == std::string::npos ? std::string::npos : r - q - 1);
                int idx = digits.empty() ? 0 : std::stoi(digits) - 1;
                if (idx < 0 || idx >= info.arity) fail(t, "bad partial index in " + word);
                if (digits.empty() && info.arity > 1) fail(t, "partial of multi-argument function needs an index");
                partials.push_back(idx);
                q = r;
            }
            expect("(");
            std::vector<Expr> args;
            if (!is(")")) {
                do args.push_back(expr());
                while (accept(","));
            }
            expect(")");
            if (int(args.size()) != info.arity) fail(t, "function " + name + " expects " + std::to_string(info.arity) + " arguments");
            return Expr::apply(fid, std::move(args), partials);
        }
        if (q != std::string::npos) fail(t, "unknown function '" + name + "'");
        if (int p = model_.syms.param_id(word); p >= 0) return Expr::parameter(p);
        if (int v = model_.syms.var_id(word); v >= 0) return Expr::variable(v);
        fail(t, "unknown identifier '" + word + "'");
    }
};

}  // namespace parse_detail

inline Model parse_model(const std::string& text) {
    Model m;
    parse_detail::Parser p(text, m);
    p.parse_model();
    return m;
}

inline Model load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_model(ss.str());
}

// Parse an expression against the model's declarations.
inline Expr parse_expr(const Model& m, const std::string& text) {
    Model scratch;
    scratch.syms = m.syms;
    parse_detail::Parser p(text, scratch);
    return p.parse_standalone_expr();
}

inline VarKey parse_var(const Model& m, const std::string& text) {
    Expr e = parse_expr(m, text);
    const auto& ts = e.terms();
    if (ts.size() != 1 || ts[0].coef != Rational(1) || ts[0].mono.eps != 0 || ts[0].mono.factors.size() != 1 ||
        ts[0].mono.factors[0].second != 1 || ts[0].mono.factors[0].first.kind != Atom::Var)
        throw ParseError(1, 1, "not a variable: " + text);
    return ts[0].mono.factors[0].first.var;
}

inline std::string print_model(const Model& m) {
    std::ostringstream o;
    o << "model " << m.name << "\n";
    for (const auto& p : m.syms.params) o << "param " << p.name << " = " << rational_str(p.value) << ";\n";
    if (!m.syms.vars.empty()) {
        o << "var ";
        for (size_t i = 0; i < m.syms.vars.size(); ++i) o << (i ? ", " : "") << m.syms.vars[i];
        o << ";\n";
    }
    for (const auto& f : m.syms.funcs)
        if (!f.builtin) o << "function " << f.name << "(" << f.arity << ");\n";
    for (const auto& md : m.modes) {
        o << "mode " << md.name << " {\n";
        for (const auto& e : md.equations) o << "  eq " << e.label << ": " << to_string(e.expr, m.syms) << " = 0;\n";
        o << "}\n";
    }
    for (const auto& t : m.transitions) {
        o << "transition " << t.from << " -> " << t.to;
        if (!t.guard) {
            o << " exogenous;\n";
            continue;
        }
        o << " on up(" << to_string(*t.guard, m.syms) << ")";
        for (const auto& f : t.facts) o << " fact " << to_string(f, m.syms) << ";";
        o << ";\n";
    }
    return o.str();
}

// ---------------------------------------------------------------------------
// validation

struct Finding {
    std::string kind;  // "non_square", "sigma_failure", "duplicate_label", "guard_scope"
    std::string where;
    std::string message;
    std::vector<std::string> cert_equations;
    std::vector<std::string> cert_variables;
};

struct ModeSigmaReport {
    std::string mode;
    bool ok = false;
    std::vector<std::string> labels;
    std::vector<std::string> vars;
    SigmaOffsets offsets;
};

struct ValidationReport {
    std::vector<Finding> findings;
    std::vector<ModeSigmaReport> modes;
    bool ok() const { return findings.empty(); }
};

inline ValidationReport validate_model(const Model& m) {
    ValidationReport r;
    for (const auto& md : m.modes) {
        std::set<std::string> seen;
        for (const auto& e : md.equations)
            if (!seen.insert(e.label).second)
                r.findings.push_back({"duplicate_label", md.name, "duplicate equation label '" + e.label + "'", {}, {}});
        DAESystem s = md.system();
        ModeSigmaReport ms;
        ms.mode = md.name;
        ms.labels = s.labels;
        for (int b : s.vars) ms.vars.push_back(m.syms.vars[b]);
        if (int(s.vars.size()) != s.size()) {
            auto dm = dm_decompose(incidence(s));
            Finding f{"non_square", md.name,
                      std::to_string(s.size()) + " equations over " + std::to_string(s.vars.size()) + " variables (" +
                          (s.size() < int(s.vars.size()) ? "under-determined" : "over-determined") + ")",
                      {}, {}};
            for (int e : dm.eq_under) f.cert_equations.push_back(s.labels[e]);
            for (int e : dm.eq_over) f.cert_equations.push_back(s.labels[e]);
            for (int v : dm.var_under) f.cert_variables.push_back(m.syms.vars[s.vars[v]]);
            for (int v : dm.var_over) f.cert_variables.push_back(m.syms.vars[s.vars[v]]);
            r.findings.push_back(std::move(f));
        } else {
            try {
                ms.offsets = solve_sigma(s, m.syms);
                ms.ok = true;
            } catch (const StructuralError& e) {
                r.findings.push_back({"sigma_failure", md.name, e.what(), e.cert_equations, e.cert_variables});
            }
        }
        r.modes.push_back(std::move(ms));
    }
    for (const auto& t : m.transitions) {
        if (!t.guard) continue;
        const Mode* prev = m.mode(t.from);
        auto pv = prev->variables();
        for (const auto& v : variables(*t.guard))
            if (v.role != Role::Plain || v.k != 0 || std::find(pv.begin(), pv.end(), v.base) == pv.end())
                r.findings.push_back({"guard_scope", t.from + " -> " + t.to,
                                      "guard references " + to_string(v, m.syms) + " outside the previous mode", {}, {}});
    }
    return r;
}

}  // namespace mdae
