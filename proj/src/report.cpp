#include "ebtd/report.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace ebtd {

ReportRecord to_record(const RiskReport& risk)
{
    return {risk.name, risk.mean_loss, std::nullopt, risk.std_error, risk.seed};
}

ReportRecord to_record(const ConditionReport& condition, std::uint64_t seed)
{
    const double se = condition.std_errors.empty() ? 0.0 : condition.std_errors.front();
    return {condition.name, condition.lhs, condition.rhs, se, seed};
}

std::uint64_t fnv1a(std::string_view bytes)
{
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::string format_header(const RunHeader& header)
{
    return fmt::format("# command={} seed={} config_hash={:016x}\n# config={}\n", header.command, header.seed,
                       fnv1a(header.config_json), header.config_json);
}

std::string format_number(double v)
{
    // fmt's default presentation is the shortest representation that round-trips.
    return fmt::format("{}", v);
}

namespace {

std::string csv_cell(const std::string& cell)
{
    if (cell.find_first_of(",\"\n\r") == std::string::npos) {
        return cell;
    }
    std::string quoted = "\"";
    for (char c : cell) {
        if (c == '"') {
            quoted += '"';
        }
        quoted += c;
    }
    return quoted + "\"";
}

void append_row(std::string& out, const std::vector<std::string>& row)
{
    for (std::size_t k = 0; k < row.size(); ++k) {
        if (k > 0) {
            out += ',';
        }
        out += csv_cell(row[k]);
    }
    out += '\n';
}

} // namespace

std::string format_table_csv(const RunHeader& header, const Table& table)
{
    std::string out = format_header(header);
    append_row(out, table.columns);
    for (const auto& row : table.rows) {
        append_row(out, row);
    }
    return out;
}

std::string format_records_jsonl(const RunHeader& header, const std::vector<ReportRecord>& records)
{
    nlohmann::ordered_json head;
    head["command"] = header.command;
    head["seed"] = header.seed;
    head["config_hash"] = fmt::format("{:016x}", fnv1a(header.config_json));
    head["config"] = nlohmann::ordered_json::parse(header.config_json);
    std::string out = head.dump() + "\n";
    for (const ReportRecord& r : records) {
        nlohmann::ordered_json j;
        j["name"] = r.name;
        j["lhs"] = r.lhs;
        j["rhs"] = r.rhs ? nlohmann::ordered_json(*r.rhs) : nlohmann::ordered_json(nullptr);
        j["se"] = r.se;
        j["seed"] = r.seed;
        out += j.dump() + "\n";
    }
    return out;
}

} // namespace ebtd
