#include "commands.hpp"

#include "ebtd/error.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

using ebtd::cli::Json;

namespace {

struct Flags {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> replicates;
    std::optional<std::string> loss;
    std::optional<std::string> out;
    std::string threads = "auto";
    std::optional<std::string> config;
    std::optional<std::string> data;
    std::optional<std::string> workers;
    std::optional<std::string> questions;
    std::optional<std::string> truth;
    std::optional<std::string> sigmas;
    std::optional<std::string> pipelines;
    std::optional<std::string> reference;
    std::optional<std::string> bases;
    std::optional<std::string> base;
    std::optional<std::string> psi;
    std::optional<std::size_t> partition;
    std::optional<double> sigma2;
    std::optional<double> epsilon;
    std::optional<double> delta;
    std::optional<double> bound;
    bool positive_part = false;
};

void add_common(CLI::App* cmd, Flags& f, bool with_loss)
{
    cmd->add_option("--seed", f.seed, "64-bit seed");
    cmd->add_option("--out", f.out, "directory for <command>.csv and <command>.jsonl (default: CSV to stdout)");
    cmd->add_option("--threads", f.threads, "worker threads, N or auto")->default_str("auto");
    cmd->add_option("--config", f.config, "JSON config file; its values win over flags");
    if (with_loss) {
        cmd->add_option("--loss", f.loss, "loss convention")->check(CLI::IsMember({"sum", "mean"}));
    }
}

std::vector<std::string> split_names(const std::string& text)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t comma = text.find(',', start);
        const std::size_t end = comma == std::string::npos ? text.size() : comma;
        out.push_back(text.substr(start, end - start));
        if (comma == std::string::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

// Only flags the user actually passed enter the JSON layer.
Json flags_to_json(const std::string& command, const Flags& f)
{
    using namespace ebtd::cli;
    Json j = Json::object();
    if (f.seed) {
        j["seed"] = *f.seed;
    }
    if (f.replicates) {
        j[command == "evaluate" ? "samples" : "replicates"] = *f.replicates;
    }
    if (f.loss) {
        j["loss"] = *f.loss;
    }
    if (f.data) {
        j["data"] = *f.data;
    }
    if (f.workers) {
        const Json list = parse_count_list(*f.workers);
        j["workers"] = command == "conditions" ? list.at(0) : list;
    }
    if (f.questions) {
        const Json list = parse_count_list(*f.questions);
        j["questions"] = command == "conditions" ? list.at(0) : list;
    }
    if (f.truth) {
        j["truth"] = parse_truth_flag(*f.truth);
    }
    if (f.sigmas) {
        j["sigmas"] = parse_sigmas_flag(*f.sigmas);
    }
    if (f.pipelines) {
        j["pipelines"] = split_names(*f.pipelines);
    }
    if (f.reference) {
        j["reference"] = *f.reference;
    }
    if (f.bases) {
        j["bases"] = split_names(*f.bases);
    }
    if (f.base) {
        j["base"] = *f.base;
    }
    if (f.psi) {
        j["psi"] = *f.psi;
    }
    if (f.partition) {
        j["partition"] = *f.partition;
    }
    if (f.positive_part) {
        j["positive_part"] = true;
    }
    if (f.sigma2) {
        j["sigma2"] = *f.sigma2;
    }
    if (f.epsilon) {
        j["epsilon"] = *f.epsilon;
    }
    if (f.delta) {
        j["delta"] = *f.delta;
    }
    if (f.bound) {
        j["bound"] = *f.bound;
    }
    return j;
}

unsigned parse_threads(const std::string& text)
{
    if (text == "auto") {
        return 0;
    }
    std::size_t used = 0;
    int n = 0;
    try {
        n = std::stoi(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != text.size() || n < 1) {
        throw ebtd::Error(ebtd::ErrorCode::InvalidArgument, "--threads takes a positive integer or 'auto'");
    }
    return static_cast<unsigned>(n);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Empirical Bayes shrinkage on top of truth-discovery aggregation"};
    app.require_subcommand(1);
    Flags f;

    CLI::App* demo = app.add_subcommand("demo-table1", "recompute the four-worker worked example and self-check it");
    add_common(demo, f, true);

    CLI::App* simulate = app.add_subcommand("simulate", "paired Monte Carlo risk over an (n, m) grid");
    add_common(simulate, f, true);
    simulate->add_option("--replicates", f.replicates, "replicates per grid cell");
    simulate->add_option("--workers", f.workers, "comma-separated worker counts");
    simulate->add_option("--questions", f.questions, "comma-separated question counts");
    simulate->add_option("--truth", f.truth, "constant:<v> | gaussian:<mean>,<var> | explicit:<v1>,...");
    simulate->add_option("--sigmas", f.sigmas, "indexed | gaussian_sq[:<mean>,<var>,<floor>] | explicit:<s1>,...");
    simulate->add_option("--pipelines", f.pipelines,
                         "comma-separated: blue, eb_blue, blue_stein, <base>, eb/<base>/<psi>[/alpha=<v|star>]");
    simulate->add_option("--reference", f.reference, "pipeline the ratios are taken against");

    CLI::App* evaluate = app.add_subcommand("evaluate", "improvement ratio on a dataset by subsampling");
    add_common(evaluate, f, true);
    evaluate->add_option("--data", f.data, "dataset CSV")->check(CLI::ExistingFile);
    evaluate->add_option("--replicates,--samples", f.replicates, "subsamples per cell");
    evaluate->add_option("--workers", f.workers, "comma-separated subsample worker counts");
    evaluate->add_option("--questions", f.questions, "comma-separated subsample question counts");
    evaluate->add_option("--bases", f.bases, "comma-separated: mean, median, crh, catd, distance");
    evaluate->add_option("--psi", f.psi, "heuristic | sample[:c] | constant:c | oracle:g1,g2,...");
    evaluate->add_option("--partition", f.partition, "split questions into k buckets by ground truth");
    evaluate->add_flag("--positive-part", f.positive_part, "clip the shrinkage weight at 0");

    CLI::App* conditions = app.add_subcommand("conditions", "gain conditions and risk decompositions");
    add_common(conditions, f, false);
    conditions->add_option("--replicates", f.replicates, "replicates");
    conditions->add_option("--workers", f.workers, "worker count");
    conditions->add_option("--questions", f.questions, "question count");
    conditions->add_option("--truth", f.truth, "constant:<v> | gaussian:<mean>,<var> | explicit:<v1>,...");
    conditions->add_option("--sigmas", f.sigmas, "indexed | gaussian_sq[:<mean>,<var>,<floor>] | explicit:<s1>,...");
    conditions->add_option("--base", f.base, "mean, median, crh, catd, distance, blue");
    conditions->add_option("--psi", f.psi, "heuristic | sample[:c] | constant:c | oracle:g1,g2,...");
    conditions->add_option("--sigma2", f.sigma2, "aggregate variance (default: known for blue and mean)");
    conditions->add_option("--epsilon", f.epsilon, "declared |psi - sigma2| bound");
    conditions->add_option("--delta", f.delta, "declared Pr(psi < sigma2)");
    conditions->add_option("--bound", f.bound, "declared upper bound on psi");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ebtd::cli::kOk : ebtd::cli::kValidation;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        ebtd::cli::RunOptions options;
        options.threads = parse_threads(f.threads);
        if (f.out) {
            options.out_dir = *f.out;
        }
        std::optional<std::filesystem::path> config_file;
        if (f.config) {
            config_file = *f.config;
        }
        const Json config = ebtd::cli::resolve_config(command, flags_to_json(command, f), config_file);
        return ebtd::cli::execute(command, config, options, std::cout, std::cerr);
    } catch (const ebtd::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.code() == ebtd::ErrorCode::Io ? ebtd::cli::kIo : ebtd::cli::kValidation;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return ebtd::cli::kValidation;
    }
}
