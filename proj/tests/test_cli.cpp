#include "mdae/cli.hpp"

#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

using namespace mdae;

namespace {

struct Run {
    int code = -1;
    std::string out;
};

Run run(const std::string& args) {
    std::string cmd = std::string("MDAE_COLOR=0 ") + MDAE_CLI_PATH + " " + args + " 2>&1";
    Run r;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return r;
    std::array<char, 4096> buf;
    size_t n;
    while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
    int st = pclose(p);
    r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    return r;
}

std::string corpus(const std::string& name) { return std::string(MDAE_CORPUS_DIR) + "/" + name + "/model.mdae"; }

std::string temp_model(const std::string& name, const std::string& text) {
    auto p = std::filesystem::temp_directory_path() / ("mdae_cli_" + name + ".mdae");
    std::ofstream(p) << text;
    return p.string();
}

}  // namespace

TEST(Cli, CheckCupAndBall) {
    auto r = run("check " + corpus("cup_and_ball"));
    EXPECT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("c(k1) = 2"), std::string::npos) << r.out;
}

TEST(Cli, CheckUnderDetermined) {
    auto f = temp_model("under", "model u\nvar x, y;\nmode a { eq f: der(x) + y = 0; }\n");
    auto r = run("check " + f);
    EXPECT_EQ(r.code, kExitStructural) << r.out;
    EXPECT_NE(r.out.find("non_square"), std::string::npos);
    EXPECT_NE(r.out.find("under-determined"), std::string::npos);
}

TEST(Cli, MissingFile) {
    auto r = run("check /nonexistent/model.mdae");
    EXPECT_EQ(r.code, kExitUsage);
    EXPECT_NE(r.out.find("cannot read"), std::string::npos) << r.out;
}

TEST(Cli, BadUsage) {
    EXPECT_EQ(run("restart " + corpus("cup_and_ball")).code, kExitUsage);
    EXPECT_EQ(run("frobnicate").code, kExitUsage);
}

TEST(Cli, RestartCupAndBall) {
    auto r = run("restart " + corpus("cup_and_ball") + " --from free --to straight");
    EXPECT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("left(x)*down(lambda) - left(der(x)) + right(der(x))"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("cont(x):  0 = -left(x) + right(x)"), std::string::npos) << r.out;
}

TEST(Cli, RestartJsonSchema) {
    auto r = run("--json restart " + corpus("cup_and_ball") + " --from free --to straight");
    ASSERT_EQ(r.code, 0) << r.out;
    json j = json::parse(r.out);
    EXPECT_EQ(j["schema_version"], kSchemaVersion);
    EXPECT_EQ(j["command"], "restart");
    EXPECT_TRUE(j["result"]["goodness"]["good"].get<bool>());
    EXPECT_EQ(j["result"]["restart"]["equations"].size(), 5u);
    EXPECT_TRUE(j["result"]["diagnosis"].is_null());
}

TEST(Cli, ForcedHeightGivesDiagnosis) {
    auto r = run("--json restart " + corpus("cup_and_ball") + " --from free --to straight --height 2");
    ASSERT_EQ(r.code, kExitDiagnosis) << r.out;
    json j = json::parse(r.out);
    std::set<std::string> w;
    for (const auto& v : j["result"]["goodness"]["w39"]) w.insert(v.get<std::string>());
    EXPECT_EQ(w, (std::set<std::string>{"shift(der(x,2),1)", "shift(der(y,2),1)"}));
    auto t = run("restart " + corpus("cup_and_ball") + " --from free --to straight --height 2");
    EXPECT_NE(t.out.find("(39) violated by"), std::string::npos) << t.out;
}

TEST(Cli, ClutchNumericRestart) {
    auto r = run("--json restart " + corpus("clutch_linear") + " --from released --to engaged --limits '{\"w1\":3,\"w2\":0}'");
    ASSERT_EQ(r.code, 0) << r.out;
    json j = json::parse(r.out);
    std::map<std::string, double> v;
    for (const auto& e : j["numeric"]["values"]) v[e["var"]] = e["value"];
    EXPECT_NEAR(v["right(w1)"], 1.0, 1e-12);
    EXPECT_NEAR(v["right(w2)"], 1.0, 1e-12);
}

TEST(Cli, LimitsFromCorpusFile) {
    auto lim = std::string(MDAE_CORPUS_DIR) + "/cup_and_ball/limits.json";
    auto r = run("--json restart " + corpus("cup_and_ball") + " --from free --to straight --limits " + lim +
                 " --verify-eps 1e-2,1e-3,1e-4");
    ASSERT_EQ(r.code, 0) << r.out;
    json j = json::parse(r.out);
    EXPECT_TRUE(j["convergence"]["decreasing"].get<bool>());
    EXPECT_GE(j["convergence"]["order"].get<double>(), 0.9);
    EXPECT_EQ(j["convergence"]["points"].size(), 3u);
}

TEST(Cli, VerifyEpsNeedsLimits) {
    auto r = run("restart " + corpus("cup_and_ball") + " --from free --to straight --verify-eps 0.01");
    EXPECT_EQ(r.code, kExitUsage);
}

TEST(Cli, NoGoodSolutionExitCode) {
    auto r = run("restart " + corpus("clutch_nonlinear_torque") + " --from released --to engaged");
    EXPECT_EQ(r.code, kExitDiagnosis) << r.out;
    EXPECT_NE(r.out.find("(37) violated"), std::string::npos);
}

TEST(Cli, UnknownTransitionIsStructural) {
    auto r = run("restart " + corpus("cup_and_ball") + " --from straight --to free");
    EXPECT_EQ(r.code, kExitStructural) << r.out;
    EXPECT_NE(r.out.find("NoTransition"), std::string::npos);
}

TEST(Cli, ExplainCupAndBallTable) {
    auto r = run("--json explain " + corpus("cup_and_ball") + " --from free --to straight");
    ASSERT_EQ(r.code, 0) << r.out;
    json j = json::parse(r.out);
    EXPECT_EQ(j["array"]["rows"].size(), 10u);
    int disabled = 0, matched = 0;
    for (const auto& row : j["array"]["rows"]) {
        disabled += !row["enabled"].get<bool>();
        matched += !row["matched"].is_null();
    }
    EXPECT_EQ(matched, 8);
    EXPECT_GT(disabled, 0);
    EXPECT_EQ(j["array"]["facts"], json({"k1", "shift(k1,1)"}));
}

TEST(Cli, ExplainWithHeightTwo) {
    auto r = run("--json explain " + corpus("cup_and_ball") + " --from free --to straight --height 2");
    ASSERT_EQ(r.code, 0) << r.out;
    json j = json::parse(r.out);
    int top = 0;
    for (const auto& row : j["array"]["rows"]) top = std::max(top, row["instant"].get<int>());
    EXPECT_EQ(top, 2);
    EXPECT_TRUE(j["array"]["forced_height"].get<bool>());
}

TEST(Cli, ExplainOdeOnlyIsOneBlock) {
    auto f = temp_model("ode", "model o\nvar x;\nmode a { eq f: der(x) + x = 0; }\nmode b { eq f: der(x) - x = 0; }\n"
                               "transition a -> b exogenous;\n");
    auto r = run("--json explain " + f + " --from a --to b");
    ASSERT_EQ(r.code, 0) << r.out;
    json j = json::parse(r.out);
    for (const auto& row : j["array"]["rows"]) EXPECT_EQ(row["instant"], 0);
}

TEST(Cli, ReportsAreDeterministic) {
    std::string args = "--json restart " + corpus("cup_and_ball_exogenous") + " --from free --to straight";
    auto a = run(args);
    auto b = run(args);
    EXPECT_EQ(a.out, b.out);
    EXPECT_EQ(cmd_restart(corpus("cup_and_ball_exogenous"), {"free", "straight"}).report.dump(),
              cmd_restart(corpus("cup_and_ball_exogenous"), {"free", "straight"}).report.dump());
}

TEST(Cli, ColorDisabled) {
    auto r = run("restart " + corpus("cup_and_ball") + " --from free --to straight");
    EXPECT_EQ(r.out.find('\x1b'), std::string::npos);
    Style on{true};
    EXPECT_NE(on.bad("x").find('\x1b'), std::string::npos);
}

TEST(Cli, TextIsRenderedFromJson) {
    auto res = cmd_restart(corpus("clutch_linear"), {"released", "engaged"});
    auto roundtrip = json::parse(res.report.dump());
    EXPECT_EQ(render_text(res.report), render_text(roundtrip));
}
