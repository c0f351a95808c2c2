#pragma once

// Subcommands behind the ebtd executable. Each command takes a resolved JSON
// config and returns a tidy table plus line records; `execute` writes them and
// maps failures to exit codes.

#include "ebtd/experiments.hpp"
#include "ebtd/pipelines.hpp"
#include "ebtd/report.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

namespace ebtd::cli {

using Json = nlohmann::ordered_json;

enum ExitCode : int { kOk = 0, kValidation = 1, kIo = 2, kAssertion = 3 };

// Runtime knobs that never change the output bytes, so they stay out of the
// echoed config.
struct RunOptions {
    // 0 = hardware concurrency.
    unsigned threads = 0;
    std::optional<std::filesystem::path> out_dir;
};

struct CommandOutput {
    Table table;
    std::vector<ReportRecord> records;
    // Human-readable lines printed before the table (demo only).
    std::string text;
    bool checks_passed = true;
};

// Commands: "demo-table1", "simulate", "evaluate", "conditions".
Json default_config(std::string_view command);

/// defaults <- flags <- file; the file wins conflicts. Unknown keys are an
/// InvalidArgument error.
Json resolve_config(std::string_view command, const Json& flags,
                    const std::optional<std::filesystem::path>& config_file);

// "constant:<v>", "gaussian:<mean>,<variance>", "explicit:<v1>,<v2>,...".
Json parse_truth_flag(const std::string& text);
// "indexed", "gaussian_sq[:<mean>,<variance>,<floor>]", "explicit:<s1>,<s2>,...".
Json parse_sigmas_flag(const std::string& text);
// Comma-separated non-negative integers.
Json parse_count_list(const std::string& text);

TruthSpec truth_from_json(const Json& j);
WorkerSigmaSpec sigmas_from_json(const Json& j);

/// "blue", "eb_blue", "blue_stein", a bare base ("mean", "crh", ...), or
/// "eb/<base>/<psi>[/alpha=<value|star>][/positive]". The text becomes the label.
PipelineSpec parse_pipeline(const std::string& text);

CommandOutput run_demo_table1(const Json& config, const RunOptions& options);
CommandOutput run_simulate(const Json& config, const RunOptions& options);
CommandOutput run_evaluate(const Json& config, const RunOptions& options);
CommandOutput run_conditions(const Json& config, const RunOptions& options);

/// Runs the command and writes <out_dir>/<command>.csv and .jsonl, or the CSV
/// to `out` when no directory is set. Returns 0 ok, 1 validation, 2 I/O,
/// 3 failed self-check.
int execute(std::string_view command, const Json& config, const RunOptions& options, std::ostream& out,
            std::ostream& err);

} // namespace ebtd::cli
