#pragma once
// Golden cases under corpus/<name>/ and their field-by-field comparison.

#include "mdae/cli.hpp"

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#ifndef MDAE_CORPUS_DIR
#define MDAE_CORPUS_DIR "corpus"
#endif

namespace mdae {

struct FieldCheck {
    std::string field;
    bool ok = false;
    std::string detail;
    std::string deviation;  // non-empty: recorded disagreement with the reference
};

struct CaseResult {
    std::string name;
    std::vector<FieldCheck> checks;
    std::string error;

    bool passed() const {
        if (!error.empty()) return false;
        for (const auto& c : checks)
            if (!c.ok && c.deviation.empty()) return false;
        return true;
    }
    const FieldCheck* find(const std::string& field) const {
        for (const auto& c : checks)
            if (c.field == field) return &c;
        return nullptr;
    }
};

inline json read_json_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    return json::parse(in);
}

// Equations compared after scaling to a unit leading coefficient; the
// remaining factor must be exactly 1.
inline bool same_equation(const Expr& a, const Expr& b) {
    auto c = equal_up_to_constant(equation_form(a), equation_form(b));
    return c && *c == Rational(1);
}

// Each expected equation must claim a distinct generated one, and the
// counts must agree.
inline bool same_equation_set(const std::vector<Expr>& got, const std::vector<Expr>& want, std::string& detail) {
    if (got.size() != want.size()) {
        detail = "expected " + std::to_string(want.size()) + " equations, got " + std::to_string(got.size());
        return false;
    }
    std::vector<char> used(got.size(), 0);
    for (size_t i = 0; i < want.size(); ++i) {
        bool hit = false;
        for (size_t j = 0; j < got.size() && !hit; ++j)
            if (!used[j] && same_equation(got[j], want[i])) used[j] = hit = true;
        if (!hit) {
            detail = "no generated equation matches expected #" + std::to_string(i);
            return false;
        }
    }
    return true;
}

inline std::set<VarKey> parse_var_set(const Model& m, const json& arr) {
    std::set<VarKey> out;
    for (const auto& s : arr) out.insert(parse_var(m, s.get<std::string>()));
    return out;
}

inline std::string names_of(const std::set<VarKey>& vs, const Symbols& s) {
    std::string out;
    for (const auto& v : vs) out += (out.empty() ? "" : ", ") + to_string(v, s);
    return "{" + out + "}";
}

class CaseRunner {
public:
    CaseRunner(std::string name, const json& expect, const std::filesystem::path& dir)
        : expect_(expect), dir_(dir) {
        res_.name = std::move(name);
        if (expect_.contains("deviations"))
            for (const auto& [k, v] : expect_["deviations"].items()) deviations_[k] = v.get<std::string>();
    }

    CaseResult run() {
        try {
            model_ = load_model((dir_ / "model.mdae").string());
            check_sigma();
            if (expect_.contains("transition")) check_transition();
        } catch (const std::exception& e) {
            res_.error = e.what();
        }
        return res_;
    }

private:
    void add(const std::string& field, bool ok, const std::string& detail = "") {
        FieldCheck c{field, ok, detail, ""};
        auto it = deviations_.find(field);
        if (it != deviations_.end()) c.deviation = it->second;
        res_.checks.push_back(std::move(c));
    }

    void check_sigma() {
        if (!expect_.contains("sigma")) return;
        for (const auto& [mode, want] : expect_["sigma"].items()) {
            const Mode* md = model_.mode(mode);
            if (!md) {
                add("sigma." + mode, false, "no such mode");
                continue;
            }
            DAESystem s = md->system();
            SigmaOffsets o = solve_sigma(s, model_.syms);
            bool ok = true;
            std::string detail;
            for (const auto& [label, c] : want["c"].items()) {
                auto it = std::find(s.labels.begin(), s.labels.end(), label);
                int got = it == s.labels.end() ? -1 : o.c[it - s.labels.begin()];
                if (got != c.get<int>()) ok = false, detail += " c(" + label + ")=" + std::to_string(got);
            }
            for (const auto& [var, d] : want["d"].items()) {
                int b = model_.syms.var_id(var);
                auto it = std::find(s.vars.begin(), s.vars.end(), b);
                int got = it == s.vars.end() ? -1 : o.d[it - s.vars.begin()];
                if (got != d.get<int>()) ok = false, detail += " d(" + var + ")=" + std::to_string(got);
            }
            add("sigma." + mode, ok, detail);
        }
    }

    void check_transition() {
        const auto& t = expect_["transition"];
        std::optional<int> K;
        if (t.contains("height")) K = t["height"].get<int>();
        ModeChange mc = make_mode_change(model_, t["from"], t["to"]);
        std::optional<RestartResult> r;
        try {
            r = generate_restart(mc, K);
        } catch (const StructuralError& e) {
            add("outcome", expect_.value("outcome", "") == "error" && expect_.value("error_kind", "") == kind_name(e.kind),
                std::string(kind_name(e.kind)) + ": " + e.what());
            return;
        }
        const Symbols& syms = model_.syms;
        const ModeChangeArray& a = r->array;

        if (expect_.contains("heights")) {
            int lo = 0, hi = 0;
            for (int k : a.heights.k_lower) lo = std::max(lo, k);
            for (int k : a.heights.k_upper) hi = std::max(hi, k);
            const auto& h = expect_["heights"];
            add("heights", lo == h["K_lower"].get<int>() && hi == h["K_upper"].get<int>(),
                "K_*=" + std::to_string(lo) + " K^*=" + std::to_string(hi));
        }
        if (expect_.contains("facts")) {
            std::set<std::string> got, want;
            for (const auto& f : a.facts) got.insert(f.name);
            for (const auto& f : expect_["facts"]) want.insert(f.get<std::string>());
            std::string d;
            for (const auto& f : got) d += f + " ";
            add("facts", got == want, d);
        }
        if (expect_.contains("offsets")) check_offsets(a, r->solution, expect_["offsets"]);
        if (expect_.contains("offsets_equal_to")) check_offsets_against(*r, expect_["offsets_equal_to"].get<std::string>());
        if (expect_.contains("same_analysis_as")) check_same_analysis(*r, expect_["same_analysis_as"].get<std::string>());

        std::string outcome = expect_.value("outcome", "");
        if (outcome == "restart") {
            add("outcome", r->good(), r->good() ? "restart" : "no good solution");
            if (r->restart && expect_.contains("restart")) check_restart_system(*r->restart, expect_["restart"], "restart");
        } else if (outcome == "diagnosis") {
            add("outcome", !r->good(), r->good() ? "good solution" : "diagnosis");
            if (r->diagnosis && expect_.contains("diagnosis")) check_diagnosis(a, r->solution, *r->diagnosis, expect_["diagnosis"]);
        } else if (outcome == "error") {
            add("outcome", false, "expected a structural error");
        }
        check_numeric(*r);
        (void)syms;
    }

    void check_offsets(const ModeChangeArray& a, const RescalingSolution& sol, const json& want) {
        const Symbols& syms = model_.syms;
        bool ok = true;
        std::string detail;
        std::set<VarKey> listed;
        if (want.contains("variables"))
            for (const auto& [name, mu] : want["variables"].items()) {
                VarKey v = parse_var(model_, name);
                listed.insert(v);
                int got = offset_of(sol.mu, v);
                if (!a.vars.count(v) || got != mu.get<int>()) ok = false, detail += " mu(" + name + ")=" + std::to_string(got);
            }
        std::set<std::string> listed_rows;
        if (want.contains("equations"))
            for (const auto& [row, mu] : want["equations"].items()) {
                listed_rows.insert(row);
                bool found = false;
                for (size_t i = 0; i < a.eqs.size(); ++i)
                    if (a.eqs[i].name == row) {
                        found = true;
                        int got = sol.mu_eq[i].value_or(-1);
                        if (got != mu.get<int>()) ok = false, detail += " mu(" + row + ")=" + std::to_string(got);
                    }
                if (!found) ok = false, detail += " missing row " + row;
            }
        if (want.value("others_zero", false)) {
            for (const auto& v : a.dependent)
                if (!listed.count(v) && offset_of(sol.mu, v) != 0) ok = false, detail += " mu(" + to_string(v, syms) + ")!=0";
            for (size_t i = 0; i < a.eqs.size(); ++i)
                if (!listed_rows.count(a.eqs[i].name) && sol.mu_eq[i] && *sol.mu_eq[i] != 0)
                    ok = false, detail += " mu(" + a.eqs[i].name + ")!=0";
        }
        add("offsets", ok, detail);
        if (want.contains("w39")) {
            auto w = parse_var_set(model_, want["w39"]);
            std::set<VarKey> got(sol.w39.begin(), sol.w39.end());
            add("offsets.w39", got == w, names_of(got, syms));
        }
    }

    std::optional<RestartResult> sibling(const std::string& name, Model& m) {
        auto sdir = dir_.parent_path() / name;
        json sx = read_json_file(sdir / "expect.json");
        m = load_model((sdir / "model.mdae").string());
        const auto& t = sx["transition"];
        std::optional<int> K;
        if (t.contains("height")) K = t["height"].get<int>();
        return generate_restart(make_mode_change(m, t["from"], t["to"]), K);
    }

    static std::map<std::string, int> named_offsets(const RestartResult& r) {
        std::map<std::string, int> out;
        for (const auto& [v, mu] : r.solution.mu)
            if (!r.array.past.count(v)) out["v:" + to_string(v, r.array.mc.syms)] = mu;
        for (size_t i = 0; i < r.array.eqs.size(); ++i)
            if (r.solution.mu_eq[i]) out["e:" + r.array.eqs[i].name] = *r.solution.mu_eq[i];
        return out;
    }

    void check_offsets_against(const RestartResult& r, const std::string& other) {
        Model om;
        auto o = sibling(other, om);
        bool ok = r.good() && o->good() && named_offsets(r) == named_offsets(*o);
        add("offsets_equal_to", ok, other);
    }

    void check_same_analysis(const RestartResult& r, const std::string& other) {
        Model om;
        auto o = sibling(other, om);
        bool ok = named_offsets(r) == named_offsets(*o) && r.good() == o->good();
        if (ok && r.diagnosis && o->diagnosis) {
            const auto& d1 = *r.diagnosis;
            const auto& d2 = *o->diagnosis;
            ok = d1.determined == d2.determined && d1.undetermined == d2.undetermined && d1.violated == d2.violated;
            if (ok && d1.reduced && d2.reduced) {
                std::string detail;
                ok = same_equation_set(d1.reduced->equations, d2.reduced->equations, detail);
            }
        }
        add("same_analysis_as", ok, other);
    }

    void check_restart_system(const RestartSystem& rs, const json& want, const std::string& field) {
        if (want.contains("equations")) {
            std::vector<Expr> w;
            for (const auto& s : want["equations"]) w.push_back(parse_expr(model_, s.get<std::string>()));
            std::string detail;
            add(field + ".equations", same_equation_set(rs.equations, w, detail), detail);
        }
        if (want.contains("unknowns")) {
            auto w = parse_var_set(model_, want["unknowns"]);
            std::set<VarKey> got(rs.unknowns.begin(), rs.unknowns.end());
            add(field + ".unknowns", got == w, names_of(got, model_.syms));
        }
    }

    void check_diagnosis(const ModeChangeArray& a, const RescalingSolution& sol, const Diagnosis& d, const json& want) {
        const Symbols& syms = model_.syms;
        if (want.contains("violated")) {
            std::set<std::string> w, got(d.violated.begin(), d.violated.end());
            for (const auto& s : want["violated"]) w.insert(s.get<std::string>());
            std::string detail;
            for (const auto& s : got) detail += s + " ";
            add("diagnosis.violated", got == w, detail);
        }
        if (want.contains("w39")) {
            auto w = parse_var_set(model_, want["w39"]);
            std::set<VarKey> got(sol.w39.begin(), sol.w39.end());
            add("diagnosis.w39", got == w, names_of(got, syms));
        }
        for (const char* key : {"determined", "undetermined"}) {
            if (!want.contains(key)) continue;
            auto w = parse_var_set(model_, want[key]);
            const auto& src = std::string(key) == "determined" ? d.determined : d.undetermined;
            std::set<VarKey> got(src.begin(), src.end());
            add(std::string("diagnosis.") + key, got == w, names_of(got, syms));
        }
        if (want.contains("equations")) {
            if (!d.reduced) {
                add("diagnosis.equations", false, "no reduced system: " + d.note);
            } else {
                std::vector<Expr> w;
                for (const auto& s : want["equations"]) w.push_back(parse_expr(model_, s.get<std::string>()));
                std::string detail;
                add("diagnosis.equations", same_equation_set(d.reduced->equations, w, detail), detail);
            }
        }
        (void)a;
    }

    void check_numeric(const RestartResult& r) {
        auto p = dir_ / "limits.json";
        if (!std::filesystem::exists(p)) return;
        json lj = read_json_file(p);
        if (!lj.contains("expected") || lj["expected"].empty()) return;
        const RestartSystem* rs = r.restart ? &*r.restart : r.diagnosis && r.diagnosis->reduced ? &*r.diagnosis->reduced : nullptr;
        if (!rs) {
            add("numeric", false, "no restart system to solve");
            return;
        }
        std::map<VarKey, double> left;
        Valuation extra;
        read_limits(model_, lj["limits"].dump(), left, extra);
        double tol = lj.value("tolerance", 1e-9);
        bool ok = true;
        std::string detail;
        try {
            auto sol = solve_restart_numeric(*rs, left, extra);
            for (const auto& [name, v] : lj["expected"].items()) {
                VarKey k = parse_var(model_, name);
                auto it = sol.find(k);
                if (it == sol.end() || std::abs(it->second - v.get<double>()) > tol) {
                    ok = false;
                    detail += " " + name + "=" + (it == sol.end() ? "missing" : std::to_string(it->second));
                }
            }
        } catch (const std::exception& e) {
            ok = false;
            detail = e.what();
        }
        add("numeric", ok, detail);
    }

    json expect_;
    std::filesystem::path dir_;
    Model model_;
    CaseResult res_;
    std::map<std::string, std::string> deviations_;
};

inline CaseResult run_case(const std::filesystem::path& dir) {
    json expect = read_json_file(dir / "expect.json");
    return CaseRunner(dir.filename().string(), expect, dir).run();
}

inline std::vector<CaseResult> run_corpus(const std::filesystem::path& root = MDAE_CORPUS_DIR) {
    std::vector<std::filesystem::path> dirs;
    for (const auto& e : std::filesystem::directory_iterator(root))
        if (e.is_directory() && std::filesystem::exists(e.path() / "expect.json")) dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());
    std::vector<CaseResult> out;
    for (const auto& d : dirs) out.push_back(run_case(d));
    return out;
}

}  // namespace mdae
