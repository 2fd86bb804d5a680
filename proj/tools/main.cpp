// Scenario front end: parses configuration files, drives the module
// pipelines, and writes CSV/JSON artifacts plus a summary report.
//
// Exit codes: 0 success, 2 parse/validation error, 3 infeasible physics,
// 4 invariant violation, 1 internal error.

#include <cstdlib>
#include <iostream>

#include "CLI11.hpp"

#include "cslab/scenario.hpp"

namespace {

std::filesystem::path resolve_out_root(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("CSLAB_OUTPUT_ROOT")) return env;
    return "out";
}

int cmd_run(const std::string& config, const std::string& out_root_flag) {
    try {
        const cslab::Scenario sc = cslab::parse_scenario_file(config);
        const auto result = cslab::run_scenario(sc, resolve_out_root(out_root_flag));
        for (const auto& inv : result.invariants)
            std::cout << (inv.pass ? "PASS " : "FAIL ") << inv.name << " = " << inv.value
                      << " (threshold " << inv.threshold << ")\n";
        for (const auto& w : result.warnings) std::cout << "WARN " << w << "\n";
        std::cout << sc.name << ": summary written to " << result.summary_path
                  << " (exit " << result.exit_code << ")\n";
        return result.exit_code;
    } catch (const cslab::ParseError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

int cmd_validate(const std::string& config) {
    try {
        const cslab::Scenario sc = cslab::parse_scenario_file(config);
        std::cout << sc.name << ": ok (pipeline " << sc.pipeline << ", seed " << sc.seed
                  << ")\n";
        return 0;
    } catch (const cslab::ParseError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

int cmd_suite(const std::string& dir, const std::string& out_root_flag, int jobs) {
    try {
        const auto suite = cslab::run_suite(dir, resolve_out_root(out_root_flag), jobs);
        std::cout << "scenario                         exit  status\n";
        std::cout << "-----------------------------------------------\n";
        int failures = 0;
        for (const auto& entry : suite.entries) {
            const std::string label = entry.name.empty() ? entry.config : entry.name;
            std::cout << label;
            for (std::size_t i = label.size(); i < 33; ++i) std::cout << ' ';
            std::cout << entry.exit_code << "     " << (entry.exit_code == 0 ? "pass" : "FAIL")
                      << "\n";
            if (entry.exit_code != 0) ++failures;
        }
        std::cout << suite.entries.size() - failures << "/" << suite.entries.size()
                  << " scenarios passed\n";
        return suite.exit_code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"continuous-spectrum statistical mechanics laboratory"};
    app.require_subcommand(1);

    std::string config, dir, out_root;
    int jobs = 1;

    auto* run = app.add_subcommand("run", "run one scenario configuration");
    run->add_option("config", config, "scenario .cfg file")->required();
    run->add_option("--out-root", out_root, "output root (or CSLAB_OUTPUT_ROOT)");

    auto* validate = app.add_subcommand("validate", "parse and validate a configuration");
    validate->add_option("config", config, "scenario .cfg file")->required();

    auto* suite = app.add_subcommand("suite", "run every .cfg in a directory");
    suite->add_option("dir", dir, "directory of scenario configs")->required();
    suite->add_option("--out-root", out_root, "output root (or CSLAB_OUTPUT_ROOT)");
    suite->add_option("--jobs", jobs, "parallel scenario workers")->check(CLI::Range(1, 64));

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) return cmd_run(config, out_root);
    if (validate->parsed()) return cmd_validate(config);
    return cmd_suite(dir, out_root, jobs);
}
