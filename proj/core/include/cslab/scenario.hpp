#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cslab/common.hpp"

namespace cslab {

/// Config parse failure with the offending line.
struct ParseError : InvalidArgument {
    int line;
    ParseError(int line_, const std::string& msg)
        : InvalidArgument("line " + std::to_string(line_) + ": " + msg), line(line_) {}
};

/// Flat-sectioned key-value scenario: `key = value` lines with dotted keys,
/// '#' comments, strict key registry per pipeline.
struct Scenario {
    std::string name;
    std::string pipeline;
    std::uint64_t seed = 1;
    std::string output;  // optional subdirectory override
    std::map<std::string, std::string> values;

    bool has(const std::string& key) const { return values.count(key) > 0; }
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    std::vector<double> get_list(const std::string& key,
                                 const std::vector<double>& fallback) const;
    std::vector<std::string> get_tokens(const std::string& key,
                                        const std::vector<std::string>& fallback) const;
    /// Semicolon-separated integer tuples: "1 -1; 0 2".
    std::vector<std::vector<int>> get_modes(const std::string& key) const;
};

Scenario parse_scenario_text(const std::string& text, const std::string& source);
Scenario parse_scenario_file(const std::filesystem::path& path);

/// Exit codes: 0 ok, 2 parse/validation, 3 infeasible physics, 4 invariant
/// violation (as reported in the summary), 1 internal error.
struct InvariantRecord {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    bool pass = false;
};

struct RunResult {
    int exit_code = 0;
    std::vector<InvariantRecord> invariants;
    std::vector<std::string> artifacts;
    std::vector<std::string> warnings;
    std::string summary_path;
};

std::vector<std::string> known_pipelines();

RunResult run_scenario(const Scenario& scenario, const std::filesystem::path& out_root);

/// Parse + registry + range validation without running.
void validate_scenario(const Scenario& scenario);

struct SuiteEntry {
    std::string config;
    std::string name;
    int exit_code = 0;
};
struct SuiteResult {
    std::vector<SuiteEntry> entries;
    int exit_code = 0;
};

SuiteResult run_suite(const std::filesystem::path& config_dir,
                      const std::filesystem::path& out_root, int jobs = 1);

}  // namespace cslab
