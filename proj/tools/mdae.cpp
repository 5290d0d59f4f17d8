// mdae: structural analysis of multimode DAE mode changes.
#include "mdae/cli.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>
#include <unistd.h>

namespace {

std::vector<double> parse_eps_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(std::stod(item));
    return out;
}

int emit(const mdae::CommandResult& r, bool as_json) {
    if (as_json)
        std::cout << r.report.dump(2) << "\n";
    else
        std::cout << mdae::render_text(r.report, mdae::Style{mdae::color_enabled(isatty(1))});
    return r.code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Structural analysis and hot restart of multimode DAE models"};
    app.require_subcommand(1);
    bool as_json = false;
    app.add_flag("--json", as_json, "Print the JSON report instead of text");

    std::string file;
    auto* check = app.add_subcommand("check", "Validate a model and run the sigma method on each mode");
    check->add_option("model", file, "Model file")->required();

    mdae::RestartOptions ropt;
    std::string eps_list;
    int height = -1;
    auto* restart = app.add_subcommand("restart", "Build the restart system of a mode change");
    restart->add_option("model", file, "Model file")->required();
    restart->add_option("--from", ropt.from, "Previous mode")->required();
    restart->add_option("--to", ropt.to, "New mode")->required();
    restart->add_option("--height", height, "Force the array height K")->check(CLI::NonNegativeNumber);
    restart->add_option("--limits", ropt.limits, "Left limits: JSON file or inline JSON object");
    restart->add_option("--verify-eps", eps_list, "Comma-separated step sizes for the convergence check");

    std::string efrom, eto;
    int eheight = -1;
    auto* explain = app.add_subcommand("explain", "Print the full mode change array");
    explain->add_option("model", file, "Model file")->required();
    explain->add_option("--from", efrom, "Previous mode")->required();
    explain->add_option("--to", eto, "New mode")->required();
    explain->add_option("--height", eheight, "Force the array height K")->check(CLI::NonNegativeNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : mdae::kExitUsage;
    }

    if (*check) return emit(mdae::cmd_check(file), as_json);
    if (*restart) {
        if (height >= 0) ropt.height = height;
        try {
            ropt.verify_eps = parse_eps_list(eps_list);
        } catch (const std::exception&) {
            std::cerr << "bad --verify-eps list: " << eps_list << "\n";
            return mdae::kExitUsage;
        }
        return emit(mdae::cmd_restart(file, ropt), as_json);
    }
    std::optional<int> h;
    if (eheight >= 0) h = eheight;
    return emit(mdae::cmd_explain(file, efrom, eto, h), as_json);
}
