#pragma once

// Report serialization: tidy CSV tables and line-delimited JSON records, both
// prefixed with the run's seed, config hash and resolved config.

#include "ebtd/analysis.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ebtd {

struct ReportRecord {
    std::string name;
    double lhs = 0.0;
    std::optional<double> rhs;
    double se = 0.0;
    std::uint64_t seed = 0;
};

ReportRecord to_record(const RiskReport& risk);
ReportRecord to_record(const ConditionReport& condition, std::uint64_t seed);

// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);

struct RunHeader {
    std::string command;
    std::uint64_t seed = 0;
    // Compact JSON of the resolved configuration.
    std::string config_json;
};

// "# command=... seed=... config_hash=<16 hex>" then "# config=<json>".
std::string format_header(const RunHeader& header);

// Shortest round-trip decimal for v, identical on every run.
std::string format_number(double v);

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};

// Cells containing commas, quotes or newlines are quoted.
std::string format_table_csv(const RunHeader& header, const Table& table);

// One JSON object per line. The first carries command, seed, config_hash and
// config; each following one is {"name","lhs","rhs","se","seed"}, rhs null if
// absent. `config_json` must be valid JSON.
std::string format_records_jsonl(const RunHeader& header, const std::vector<ReportRecord>& records);

} // namespace ebtd
