#pragma once
// JSON reports and their text rendering.

#include "mdae/model.hpp"
#include "mdae/restart.hpp"

#include <json.hpp>

#include <cstdlib>
#include <sstream>
#include <string>

namespace mdae {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

inline json offset_json(int v) { return v >= kInf ? json("inf") : json(v); }

inline json sigma_json(const ModeSigmaReport& ms) {
    json j;
    j["mode"] = ms.mode;
    j["ok"] = ms.ok;
    j["equations"] = json::array();
    j["variables"] = json::array();
    if (!ms.ok) return j;
    for (size_t f = 0; f < ms.labels.size(); ++f) j["equations"].push_back({{"label", ms.labels[f]}, {"c", ms.offsets.c[f]}});
    for (size_t v = 0; v < ms.vars.size(); ++v) {
        int f = ms.offsets.eq_of_var(int(v));
        j["variables"].push_back({{"name", ms.vars[v]}, {"d", ms.offsets.d[v]}, {"matched", f >= 0 ? ms.labels[f] : ""}});
    }
    return j;
}

inline json error_json(const StructuralError& e) {
    return {{"kind", kind_name(e.kind)}, {"message", e.what()}, {"equations", e.cert_equations}, {"variables", e.cert_variables}};
}

inline json restart_system_json(const RestartSystem& rs) {
    json j;
    j["equations"] = json::array();
    for (int i = 0; i < rs.size(); ++i) j["equations"].push_back({{"label", rs.labels[i]}, {"expr", to_string(rs.equations[i], rs.syms)}});
    j["unknowns"] = json::array();
    for (const auto& v : rs.unknowns) j["unknowns"].push_back(to_string(v, rs.syms));
    j["restart_states"] = json::array();
    for (const auto& v : rs.restart_states) j["restart_states"].push_back(to_string(v, rs.syms));
    j["eliminated"] = json::array();
    for (const auto& [k, e] : rs.eliminated)
        j["eliminated"].push_back({{"var", to_string(k, rs.syms)}, {"expr", to_string(e, rs.syms)}});
    return j;
}

inline json array_json(const ModeChangeArray& a, const ArrayMatching& m) {
    const Symbols& s = a.mc.syms;
    json j;
    j["heights"] = json::array();
    for (int f = 0; f < a.mc.next.size(); ++f)
        j["heights"].push_back({{"label", a.mc.next.labels[f]},
                                {"K_lower", a.heights.k_lower[f]},
                                {"K_upper", a.heights.k_upper[f]},
                                {"K", a.K[f]}});
    j["forced_height"] = a.forced_height;
    j["facts"] = json::array();
    for (const auto& f : a.facts) j["facts"].push_back(f.name);
    j["rows"] = json::array();
    for (size_t r = 0; r < a.eqs.size(); ++r) {
        const auto& e = a.eqs[r];
        json row{{"name", e.name},
                 {"kind", e.kind == ArrayEq::ModelRow ? "model" : "euler"},
                 {"instant", e.kind == ArrayEq::ModelRow ? e.k : e.x.k},
                 {"enabled", e.enabled},
                 {"inherited", e.inherited},
                 {"expr", to_string(e.expr, s)}};
        row["matched"] = m.row_var[r] ? json(to_string(*m.row_var[r], s)) : json(nullptr);
        j["rows"].push_back(std::move(row));
    }
    auto names = [&](const std::set<VarKey>& vs) {
        json out = json::array();
        for (const auto& v : vs) out.push_back(to_string(v, s));
        return out;
    };
    j["past"] = names(a.past);
    j["dependent"] = names(a.dependent);
    j["tail"] = names(a.tail_vars);
    return j;
}

inline json matching_json(const ModeChangeArray& a, const ArrayMatching& m) {
    json j = json::array();
    for (size_t r = 0; r < a.eqs.size(); ++r)
        if (m.row_var[r]) j.push_back({{"row", a.eqs[r].name}, {"var", to_string(*m.row_var[r], a.mc.syms)}});
    return j;
}

inline json rescaling_json(const ModeChangeArray& a, const RescalingSolution& sol) {
    const Symbols& s = a.mc.syms;
    json j;
    j["variables"] = json::array();
    for (const auto& [v, mu] : sol.mu)
        if (!a.past.count(v)) j["variables"].push_back({{"var", to_string(v, s)}, {"mu", offset_json(mu)}});
    j["equations"] = json::array();
    for (size_t r = 0; r < a.eqs.size(); ++r)
        if (sol.mu_eq[r]) j["equations"].push_back({{"row", a.eqs[r].name}, {"mu", offset_json(*sol.mu_eq[r])}});
    return j;
}

inline json goodness_json(const ModeChangeArray& a, const RescalingSolution& sol) {
    auto names = [&](const std::vector<VarKey>& vs) {
        json out = json::array();
        for (const auto& v : vs) out.push_back(to_string(v, a.mc.syms));
        return out;
    };
    return {{"good", sol.good()}, {"verified", sol.verified}, {"g37", sol.g37}, {"g38", sol.g38}, {"g39", sol.g39},
            {"w37", sol.w37},     {"w38", names(sol.w38)},    {"w39", names(sol.w39)}};
}

inline json diagnosis_json(const ModeChangeArray& a, const Diagnosis& d) {
    const Symbols& s = a.mc.syms;
    auto names = [&](const std::vector<VarKey>& vs) {
        json out = json::array();
        for (const auto& v : vs) out.push_back(to_string(v, s));
        return out;
    };
    json j{{"violated", d.violated},
           {"removed_for", names(d.removed_for)},
           {"removed_rows", d.removed_rows},
           {"regular_rows", d.regular_rows},
           {"determined", names(d.determined)},
           {"undetermined", names(d.undetermined)},
           {"note", d.note}};
    j["reduced"] = d.reduced ? restart_system_json(*d.reduced) : json(nullptr);
    return j;
}

inline json restart_result_json(const RestartResult& r) {
    json j;
    j["array_size"] = {{"rows", r.array.eqs.size()}, {"variables", r.array.dependent.size()}};
    j["heights"] = array_json(r.array, r.matching)["heights"];
    j["facts"] = json::array();
    for (const auto& f : r.array.facts) j["facts"].push_back(f.name);
    j["matching"] = matching_json(r.array, r.matching);
    j["rescaling"] = rescaling_json(r.array, r.solution);
    j["goodness"] = goodness_json(r.array, r.solution);
    j["restart"] = r.restart ? restart_system_json(*r.restart) : json(nullptr);
    j["diagnosis"] = r.diagnosis ? diagnosis_json(r.array, *r.diagnosis) : json(nullptr);
    return j;
}

// ---------------------------------------------------------------------------
// text

struct Style {
    bool color = false;
    std::string bold(const std::string& s) const { return color ? "\x1b[1m" + s + "\x1b[0m" : s; }
    std::string good(const std::string& s) const { return color ? "\x1b[32m" + s + "\x1b[0m" : s; }
    std::string bad(const std::string& s) const { return color ? "\x1b[31m" + s + "\x1b[0m" : s; }
};

inline bool color_enabled(bool is_tty) {
    const char* c = std::getenv("MDAE_COLOR");
    if (c && std::string(c) == "0") return false;
    return is_tty;
}

namespace text_detail {

inline std::string scalar(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

inline std::string join(const json& arr, const std::string& sep = ", ") {
    std::string out;
    for (size_t i = 0; i < arr.size(); ++i) out += (i ? sep : "") + scalar(arr[i]);
    return out;
}

inline void restart_block(std::ostream& o, const json& rs) {
    for (const auto& e : rs["equations"]) o << "  " << scalar(e["label"]) << ":  0 = " << scalar(e["expr"]) << "\n";
    o << "  unknowns: " << join(rs["unknowns"]) << "\n";
    for (const auto& e : rs["eliminated"]) o << "  eliminated " << scalar(e["var"]) << " = " << scalar(e["expr"]) << "\n";
}

inline void error_block(std::ostream& o, const json& e, const Style& st) {
    o << st.bad("error " + scalar(e["kind"])) << ": " << scalar(e["message"]) << "\n";
    if (!e["equations"].empty()) o << "  equations: " << join(e["equations"]) << "\n";
    if (!e["variables"].empty()) o << "  variables: " << join(e["variables"]) << "\n";
}

}  // namespace text_detail

// Human-readable view of a report; reads only the JSON document.
inline std::string render_text(const json& rep, const Style& st = {}) {
    using namespace text_detail;
    std::ostringstream o;
    o << st.bold(scalar(rep["command"]) + " " + scalar(rep["model"]));
    if (rep.contains("transition")) o << "  " << scalar(rep["transition"]["from"]) << " -> " << scalar(rep["transition"]["to"]);
    o << "\n";
    if (rep.contains("findings") && !rep["findings"].empty()) {
        o << "findings:\n";
        for (const auto& f : rep["findings"]) {
            o << "  " << st.bad(scalar(f["kind"])) << " [" << scalar(f["where"]) << "] " << scalar(f["message"]) << "\n";
            if (!f["equations"].empty()) o << "    equations: " << join(f["equations"]) << "\n";
            if (!f["variables"].empty()) o << "    variables: " << join(f["variables"]) << "\n";
        }
    }
    if (rep.contains("sigma")) {
        for (const auto& ms : rep["sigma"]) {
            o << "mode " << scalar(ms["mode"]) << (ms["ok"].get<bool>() ? "" : "  (no sigma offsets)") << "\n";
            for (const auto& e : ms["equations"]) o << "  c(" << scalar(e["label"]) << ") = " << scalar(e["c"]) << "\n";
            for (const auto& v : ms["variables"])
                o << "  d(" << scalar(v["name"]) << ") = " << scalar(v["d"]) << "   matched " << scalar(v["matched"]) << "\n";
        }
    }
    if (rep.contains("error")) error_block(o, rep["error"], st);
    if (rep.contains("array")) {
        const auto& a = rep["array"];
        o << "heights:\n";
        for (const auto& h : a["heights"])
            o << "  " << scalar(h["label"]) << "  K_* = " << scalar(h["K_lower"]) << "  K^* = " << scalar(h["K_upper"])
              << "  K = " << scalar(h["K"]) << "\n";
        o << "facts: " << join(a["facts"]) << "\n";
        o << "array:\n";
        size_t w = 4;
        for (const auto& r : a["rows"]) w = std::max(w, scalar(r["name"]).size());
        for (const auto& r : a["rows"]) {
            std::string name = scalar(r["name"]);
            std::string status = r["enabled"].get<bool>() ? "" : " disabled";
            if (r["inherited"].get<bool>()) status += " inherited";
            std::string match = r["matched"].is_null() ? "-" : scalar(r["matched"]);
            o << "  [" << scalar(r["instant"]) << "] " << name << std::string(w - name.size() + 2, ' ') << "0 = "
              << scalar(r["expr"]) << "   <- " << match << status << "\n";
        }
        o << "past: " << join(a["past"]) << "\n";
    }
    if (rep.contains("result") && !rep["result"].is_null()) {
        const auto& r = rep["result"];
        o << "heights:";
        for (const auto& h : r["heights"])
            o << " " << scalar(h["label"]) << "[" << scalar(h["K_lower"]) << "," << scalar(h["K_upper"]) << "]=" << scalar(h["K"]);
        o << "\nfacts: " << join(r["facts"]) << "\n";
        o << "matching:\n";
        for (const auto& m : r["matching"]) o << "  " << scalar(m["row"]) << " <- " << scalar(m["var"]) << "\n";
        o << "rescaling offsets:\n";
        for (const auto& v : r["rescaling"]["variables"])
            if (scalar(v["mu"]) != "0") o << "  mu(" << scalar(v["var"]) << ") = " << scalar(v["mu"]) << "\n";
        for (const auto& e : r["rescaling"]["equations"])
            if (scalar(e["mu"]) != "0") o << "  mu(" << scalar(e["row"]) << ") = " << scalar(e["mu"]) << "\n";
        o << "  (all others 0)\n";
        const auto& g = r["goodness"];
        o << "goodness: " << (g["good"].get<bool>() ? st.good("good") : st.bad("not good"));
        for (const char* c : {"37", "38", "39"})
            if (!g[std::string("g") + c].get<bool>()) o << "  (" << c << ") violated by " << join(g[std::string("w") + c]);
        o << "\n";
        if (!r["restart"].is_null()) {
            o << st.bold("restart system") << ":\n";
            restart_block(o, r["restart"]);
        }
        if (!r["diagnosis"].is_null()) {
            const auto& d = r["diagnosis"];
            o << st.bold("diagnosis") << ": violated " << join(d["violated"]) << "\n";
            if (!d["removed_rows"].empty()) o << "  removed rows: " << join(d["removed_rows"]) << "\n";
            o << "  determined: " << join(d["determined"]) << "\n";
            o << "  undetermined: " << join(d["undetermined"]) << "\n";
            if (!scalar(d["note"]).empty()) o << "  note: " << scalar(d["note"]) << "\n";
            if (!d["reduced"].is_null()) {
                o << "  reduced restart system:\n";
                restart_block(o, d["reduced"]);
            }
        }
    }
    if (rep.contains("numeric")) {
        o << "numeric restart:\n";
        for (const auto& v : rep["numeric"]["values"]) o << "  " << scalar(v["var"]) << " = " << scalar(v["value"]) << "\n";
    }
    if (rep.contains("convergence")) {
        const auto& c = rep["convergence"];
        o << "eps convergence:\n";
        for (const auto& p : c["points"]) o << "  eps = " << scalar(p["eps"]) << "   error = " << scalar(p["distance"]) << "\n";
        o << "  decreasing: " << scalar(c["decreasing"]) << "   order: " << scalar(c["order"]) << "\n";
    }
    if (rep.contains("numeric_error")) o << st.bad("numeric error") << ": " << scalar(rep["numeric_error"]) << "\n";
    return o.str();
}

}  // namespace mdae
