#pragma once
// Commands behind the mdae tool. Each returns an exit code and a report.

#include "mdae/report.hpp"

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace mdae {

enum ExitCode { kExitOk = 0, kExitDiagnosis = 2, kExitStructural = 3, kExitUsage = 4 };

struct CommandResult {
    int code = kExitOk;
    json report;
};

struct RestartOptions {
    std::string from, to;
    std::optional<int> height;
    std::optional<std::string> limits;  // file path or inline JSON object
    std::vector<double> verify_eps;
};

inline json report_header(const std::string& cmd, const std::string& model) {
    return {{"schema_version", kSchemaVersion}, {"command", cmd}, {"model", model}};
}

inline CommandResult usage_error(const std::string& cmd, const std::string& msg) {
    CommandResult r{kExitUsage, report_header(cmd, "")};
    r.report["error"] = {{"kind", "Usage"}, {"message", msg}, {"equations", json::array()}, {"variables", json::array()}};
    return r;
}

inline std::optional<Model> load_or_fail(const std::string& path, const std::string& cmd, CommandResult& out) {
    try {
        return load_model(path);
    } catch (const ParseError& e) {
        out = usage_error(cmd, "parse error in " + path + ": " + e.what());
    } catch (const std::exception& e) {
        out = usage_error(cmd, e.what());
    }
    return std::nullopt;
}

inline CommandResult cmd_check(const std::string& path) {
    CommandResult r;
    auto m = load_or_fail(path, "check", r);
    if (!m) return r;
    r.report = report_header("check", m->name);
    auto v = validate_model(*m);
    r.report["findings"] = json::array();
    for (const auto& f : v.findings)
        r.report["findings"].push_back({{"kind", f.kind},
                                        {"where", f.where},
                                        {"message", f.message},
                                        {"equations", f.cert_equations},
                                        {"variables", f.cert_variables}});
    r.report["sigma"] = json::array();
    for (const auto& ms : v.modes) r.report["sigma"].push_back(sigma_json(ms));
    r.code = v.ok() ? kExitOk : kExitStructural;
    return r;
}

// Reads {"x": 1, "der(x)": 0, "L": 2} into left limits and parameter overrides.
inline void read_limits(const Model& m, const std::string& src, std::map<VarKey, double>& left, Valuation& extra) {
    std::string text = src;
    auto first = text.find_first_not_of(" \t\n");
    if (first == std::string::npos || text[first] != '{') {
        std::ifstream in(src);
        if (!in) throw std::runtime_error("cannot read limits file " + src);
        std::stringstream ss;
        ss << in.rdbuf();
        text = ss.str();
    }
    json j = json::parse(text);
    if (!j.is_object()) throw std::runtime_error("limits must be a JSON object");
    if (j.contains("limits")) j = json(j["limits"]);  // corpus limits.json layout
    for (const auto& [k, v] : j.items()) {
        if (!v.is_number()) throw std::runtime_error("limit for " + k + " is not a number");
        int p = m.syms.param_id(k);
        if (p >= 0) {
            extra.params[p] = v.get<double>();
            continue;
        }
        VarKey x = parse_var(m, k);
        if (x.role != Role::Plain || x.k != 0) throw std::runtime_error("limit key " + k + " is not a plain derivative");
        left[left_of(x.base, x.m)] = v.get<double>();
    }
}

inline json values_json(const std::map<VarKey, double>& vals, const Symbols& s) {
    json out = json::array();
    for (const auto& [k, v] : vals) out.push_back({{"var", to_string(k, s)}, {"value", v}});
    return out;
}

inline CommandResult cmd_restart(const std::string& path, const RestartOptions& opt) {
    CommandResult r;
    auto m = load_or_fail(path, "restart", r);
    if (!m) return r;
    r.report = report_header("restart", m->name);
    r.report["transition"] = {{"from", opt.from}, {"to", opt.to}};
    if (opt.height) r.report["transition"]["height"] = *opt.height;
    if (!m->mode(opt.from) || !m->mode(opt.to)) return usage_error("restart", "unknown mode " + opt.from + " or " + opt.to);
    if (!m->transition(opt.from, opt.to)) {
        r.report["error"] = {{"kind", "NoTransition"},
                             {"message", "no transition " + opt.from + " -> " + opt.to},
                             {"equations", json::array()},
                             {"variables", json::array()}};
        r.code = kExitStructural;
        return r;
    }
    std::optional<RestartResult> res;
    try {
        res = generate_restart(make_mode_change(*m, opt.from, opt.to), opt.height);
    } catch (const StructuralError& e) {
        r.report["error"] = error_json(e);
        r.code = kExitStructural;
        return r;
    }
    r.report["result"] = restart_result_json(*res);
    r.code = res->good() ? kExitOk : kExitDiagnosis;

    const RestartSystem* rs = res->restart ? &*res->restart : res->diagnosis && res->diagnosis->reduced ? &*res->diagnosis->reduced : nullptr;
    if (!opt.limits) {
        if (!opt.verify_eps.empty()) return usage_error("restart", "--verify-eps needs --limits");
        return r;
    }
    std::map<VarKey, double> left;
    Valuation extra;
    try {
        read_limits(*m, *opt.limits, left, extra);
    } catch (const std::exception& e) {
        return usage_error("restart", e.what());
    }
    if (!rs) return r;
    try {
        auto sol = solve_restart_numeric(*rs, left, extra);
        r.report["numeric"] = {{"values", values_json(sol, m->syms)}};
        if (!opt.verify_eps.empty()) {
            if (!res->good()) return usage_error("restart", "--verify-eps needs a good solution");
            auto rep = epsilon_convergence_check(res->array, res->matching, res->solution, *rs, sol, left, opt.verify_eps, extra);
            json pts = json::array();
            for (const auto& p : rep.points) pts.push_back({{"eps", p.eps}, {"distance", p.distance}});
            r.report["convergence"] = {{"points", pts}, {"decreasing", rep.decreasing}};
            r.report["convergence"]["order"] = rep.order ? json(*rep.order) : json(nullptr);
        }
    } catch (const NumericError& e) {
        r.report["numeric_error"] = e.what();
        r.code = kExitStructural;
    } catch (const EvalError& e) {
        return usage_error("restart", e.what());
    }
    return r;
}

inline CommandResult cmd_explain(const std::string& path, const std::string& from, const std::string& to,
                                 std::optional<int> height = std::nullopt) {
    CommandResult r;
    auto m = load_or_fail(path, "explain", r);
    if (!m) return r;
    r.report = report_header("explain", m->name);
    r.report["transition"] = {{"from", from}, {"to", to}};
    if (!m->mode(from) || !m->mode(to)) return usage_error("explain", "unknown mode " + from + " or " + to);
    try {
        ModeChangeArray a = build_array(make_mode_change(*m, from, to), height);
        ArrayMatching mt;
        mt.row_var.assign(a.eqs.size(), std::nullopt);
        try {
            mt = match_and_rescale(a).matching;
        } catch (const StructuralError& e) {
            r.report["error"] = error_json(e);
            r.code = kExitStructural;
        }
        r.report["array"] = array_json(a, mt);
    } catch (const StructuralError& e) {
        r.report["error"] = error_json(e);
        r.code = kExitStructural;
    }
    return r;
}

}  // namespace mdae
