// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include "ebtd/analysis.hpp"
#include "ebtd/error.hpp"
#include "ebtd/estimators.hpp"
#include "ebtd/experiments.hpp"
#include "ebtd/pipelines.hpp"
#include "ebtd/random.hpp"
#include "ebtd/td_baselines.hpp"
#include "ebtd/variance_estimators.hpp"

#include "commands.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

using namespace ebtd;

namespace {

// Tolerances and budgets.
constexpr double kRowTol = 0.01;
constexpr double kAvgLossTol = 0.005;
constexpr double kBlueLossTol = 0.05;
constexpr double kEbBlueLossTol = 0.01;
constexpr double kSeMargin = 3.0;
constexpr double kAlphaGridTol = 0.10;
constexpr double kAlphaLimitTol = 0.05;
constexpr double kHighVarianceIrLow = 0.98;
constexpr double kHighVarianceIrHigh = 1.05;
constexpr double kReproTol = 1e-12;
constexpr double kBucketVarianceReduction = 10.0;
constexpr double kDerivativeRelTol = 1e-6;

constexpr std::size_t kReplicates = 100000;
constexpr std::size_t kIrSamples = 1000;

struct Outcome {
    bool pass = true;
    std::string detail;
};

int failures = 0;

void report(const std::string& id, const std::function<Outcome()>& run)
{
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
        out = run();
    } catch (const std::exception& e) {
        out = {false, std::string("exception: ") + e.what()};
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!out.pass) {
        ++failures;
    }
    fmt::print("{} {} ({:.2f}s) {}\n", out.pass ? "PASS" : "FAIL", id, seconds, out.detail);
    std::fflush(stdout);
}

double elapsed_since(std::chrono::steady_clock::time_point start)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Outcome table1()
{
    const auto start = std::chrono::steady_clock::now();
    const Dataset ds = table1_dataset();
    const AnswerVector& gt = *ds.ground_truth;
    Outcome out;

    const AnswerVector avg = run_td(TdAlgorithm{MeanTd{}}, ds.matrix);
    const AnswerVector avg_expected{11, 9.25, 12.75, 10};
    const double avg_loss = loss(avg, gt, LossConvention::MeanSquared);
    out.pass &= avg == avg_expected;
    out.pass &= std::abs(avg_loss - 9.41) <= kAvgLossTol;

    // The printed row mixes one and two decimals; compare at the printed precision.
    const BlueResult blue = blue_aggregate(ds.matrix, *ds.worker_variances);
    const AnswerVector blue_printed{9.85, 10.6, 16.6, 12.95};
    const int printed_decimals[] = {2, 1, 1, 2};
    double raw_deviation = 0.0;
    for (std::size_t j = 0; j < 4; ++j) {
        const double scale = std::pow(10.0, printed_decimals[j]);
        const double shown = std::round(blue.answers[j] * scale) / scale;
        out.pass &= std::abs(shown - blue_printed[j]) <= kRowTol + 1e-12;
        raw_deviation = std::max(raw_deviation, std::abs(blue.answers[j] - blue_printed[j]));
    }
    const double blue_loss = loss(blue.answers, gt, LossConvention::MeanSquared);
    out.pass &= std::abs(blue_loss - 8.22) <= kBlueLossTol;

    const AnswerVector eb = eb_blue(ds.matrix, *ds.worker_variances);
    const double eb_loss = loss(eb, gt, LossConvention::MeanSquared);
    out.pass &= std::abs(eb_loss - 6.83) <= kEbBlueLossTol;
    out.pass &= eb_loss < blue_loss;

    const double seconds = elapsed_since(start);
    out.pass &= seconds < 1.0;
    out.detail = fmt::format("avg_loss={:.5f} blue=[{:.4f}, {:.4f}, {:.4f}, {:.4f}] blue_loss={:.4f} "
                             "ebblue_loss={:.4f} max raw deviation from printed BLUE={:.4f}",
                             avg_loss, blue.answers[0], blue.answers[1], blue.answers[2], blue.answers[3],
                             blue_loss, eb_loss, raw_deviation);
    return out;
}

Outcome dominance()
{
    const auto start = std::chrono::steady_clock::now();
    const std::vector<std::size_t> ns{1, 2, 4, 8};
    const std::vector<std::size_t> ms{5, 10, 25, 100};
    const std::vector<PipelineSpec> pipelines{blue_pipeline(), eb_blue_pipeline()};
    Outcome out;
    double worst_margin = 1e300;
    std::vector<double> gaps_m100;
    std::uint64_t cell = 0;
    for (std::size_t m : ms) {
        for (std::size_t n : ns) {
            SyntheticSpec spec{GaussianTruth{2.0, 1.0}, IndexedSigmas{}, n, m, 1000 + cell++};
            const PairedRisk risk = mc_risk(spec, TruthMode::Fresh, pipelines, {kReplicates, 0});
            const Summary gap = risk.difference(0, 1);
            const double margin = gap.mean / gap.std_error;
            worst_margin = std::min(worst_margin, margin);
            out.pass &= margin > kSeMargin;
            if (m == 100) {
                gaps_m100.push_back(gap.mean);
            }
        }
    }
    for (std::size_t k = 1; k < gaps_m100.size(); ++k) {
        out.pass &= gaps_m100[k] < gaps_m100[k - 1];
    }
    const double seconds = elapsed_since(start);
    out.pass &= seconds < 120.0;
    out.detail = fmt::format("min gap/se={:.1f} gaps(m=100, n=1,2,4,8)=[{:.3f}, {:.3f}, {:.3f}, {:.3f}]",
                             worst_margin, gaps_m100[0], gaps_m100[1], gaps_m100[2], gaps_m100[3]);
    return out;
}

SyntheticSpec single_worker(std::size_t m, double sigma2, std::uint64_t seed)
{
    return {GaussianTruth{2.0, 1.0}, ExplicitSigmas{VarianceVector{sigma2}}, 1, m, seed};
}

Outcome identity_gap()
{
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    const double sigma2 = 2.0;
    for (std::size_t m : {5u, 20u}) {
        const ConditionStream stream =
            collect_condition_stream(single_worker(m, sigma2, 31 + m), TdAlgorithm{MeanTd{}},
                                     VarianceEstimator::constant(sigma2), kReplicates, 0);
        const Decomposition d = independent_estimator_gap(stream, sigma2);
        out.pass &= d.agree;
        out.detail += fmt::format("m={}: mc={:.5f} closed={:.5f} diff/se={:.2f}; ", m, -d.lhs.mean,
                                  -d.rhs.mean, d.difference.mean / d.difference.std_error);
    }
    out.pass &= elapsed_since(start) < 60.0;
    return out;
}

Outcome constant_guess_gap()
{
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    const double sigma2 = 2.0;
    const std::size_t m = 10;
    std::vector<double> gaps;
    for (double scale : {0.5, 1.0, 1.5, 3.0}) {
        const ConditionStream stream =
            collect_condition_stream(single_worker(m, sigma2, 77), TdAlgorithm{MeanTd{}},
                                     VarianceEstimator::constant(scale * sigma2), kReplicates, 0);
        const Decomposition d = independent_estimator_gap(stream, sigma2);
        out.pass &= d.agree;
        gaps.push_back(d.lhs.mean);
        out.detail += fmt::format("{}s2: mc={:.5f} closed={:.5f} diff/se={:.2f}; ", scale, d.lhs.mean,
                                  d.rhs.mean, d.difference.mean / d.difference.std_error);
    }
    // Gain below 2 s2, loss above it.
    out.pass &= gaps[0] < 0.0 && gaps[1] < 0.0 && gaps[2] < 0.0 && gaps[3] > 0.0;
    out.pass &= elapsed_since(start) < 60.0;
    return out;
}

Outcome decomposition_sample_scaled()
{
    const auto start = std::chrono::steady_clock::now();
    const double sigma2 = 1.0;
    const ConditionStream stream = collect_condition_stream(single_worker(10, sigma2, 5), TdAlgorithm{MeanTd{}},
                                                            VarianceEstimator::sample_scaled(1.0), kReplicates, 0);
    const Decomposition d = thm4_decomposition(stream, sigma2);
    Outcome out;
    out.pass = d.agree && elapsed_since(start) < 60.0;
    out.detail = fmt::format("mc={:.5f} (se {:.5f}) formula={:.5f} diff/se={:.2f}", d.lhs.mean,
                             d.lhs.std_error, d.rhs.mean, d.difference.mean / d.difference.std_error);
    return out;
}

Outcome alpha_star()
{
    const double sigma2 = 1.0;
    const std::size_t m = 10;
    const SyntheticSpec fit{ConstantTruth{2.0}, ExplicitSigmas{VarianceVector{sigma2}}, 1, m, 404};
    const ConditionStream stream =
        collect_condition_stream(fit, TdAlgorithm{MeanTd{}}, VarianceEstimator::constant(sigma2), kReplicates, 0);
    const double alpha = estimate_alpha_star(stream.draws);

    // Grid search on an independent stream.
    SyntheticSpec grid_spec = fit;
    grid_spec.seed = 405;
    std::vector<PipelineSpec> grid;
    std::vector<double> alphas;
    for (int k = 0; k <= 20; ++k) {
        const double a = alpha * (0.5 + 0.05 * k);
        alphas.push_back(a);
        PipelineSpec p = eb_wrap_pipeline(TdAlgorithm{MeanTd{}}, VarianceEstimator::constant(sigma2));
        p.alpha = FixedAlpha{a};
        p.label = fmt::format("alpha={}", a);
        grid.push_back(std::move(p));
    }
    const PairedRisk risk = mc_risk(grid_spec, TruthMode::Fixed, grid, {kReplicates, 0});
    std::size_t best = 0;
    for (std::size_t k = 1; k < grid.size(); ++k) {
        if (risk.reports[k].mean_loss < risk.reports[best].mean_loss) {
            best = k;
        }
    }
    const double target = static_cast<double>(m) - 3.0;
    Outcome out;
    out.pass = std::abs(alphas[best] - alpha) <= kAlphaGridTol * alpha &&
               std::abs(alpha - target) <= kAlphaLimitTol * target;
    out.detail = fmt::format("alpha*={:.4f} (m-3={}) grid argmin={:.4f}", alpha, target, alphas[best]);
    return out;
}

std::vector<std::pair<std::string, TdAlgorithm>> all_bases()
{
    return {{"mean", TdAlgorithm{MeanTd{}}},
            {"median", TdAlgorithm{MedianTd{}}},
            {"crh", TdAlgorithm{CrhTd{}}},
            {"catd", TdAlgorithm{CatdTd{}}},
            {"distance", TdAlgorithm{DistanceWeightedTd{}}}};
}

// Seeded goldens for the faithful (unclipped) pipeline, in all_bases() order.
constexpr double kConstantGtIr[] = {63.994349148193187, 58.439206484653376, 102.06362086676324,
                                    70.366094337327397, 99.293941524226994};
constexpr double kSpreadGtIr[] = {1.071904975911476, 1.0726842933975442, 1.0920361315114764,
                                  1.0838057545788817, 1.0908868564760437};

Outcome synthetic_ir()
{
    const VarianceEstimator psi = VarianceEstimator::heuristic();
    const SyntheticSpec constant{ConstantTruth{2.0}, GaussianSqSigmas{}, 10, 50, 2024};
    const SyntheticSpec spread{GaussianTruth{0.0, 100.0}, GaussianSqSigmas{}, 10, 50, 2025};
    const auto ir = [&](const SyntheticSpec& spec, const TdAlgorithm& base, unsigned threads,
                        ShrinkageOptions options = {}) {
        return improvement_ratio(synthetic_replicates(spec, TruthMode::Fresh), base, psi, kIrSamples, threads,
                                 LossConvention::SumSquared, options)
            .ratio;
    };
    Outcome out;
    std::string constant_detail = "constant GT IR:";
    std::string spread_detail = "high-variance GT IR:";
    std::string clipped_detail = "info only, positive-part IR (constant, high-variance):";
    std::size_t k = 0;
    for (const auto& [name, base] : all_bases()) {
        const double ir_c = ir(constant, base, 0);
        const double ir_s = ir(spread, base, 0);
        out.pass &= ir_c < 1.0;
        out.pass &= ir_s >= kHighVarianceIrLow && ir_s <= kHighVarianceIrHigh;
        // Reproducible across thread counts and against the pinned goldens.
        out.pass &= std::abs(ir_c - ir(constant, base, 1)) <= kReproTol * ir_c;
        out.pass &= std::abs(ir_s - ir(spread, base, 1)) <= kReproTol * ir_s;
        out.pass &= std::abs(ir_c - kConstantGtIr[k]) <= kReproTol * kConstantGtIr[k];
        out.pass &= std::abs(ir_s - kSpreadGtIr[k]) <= kReproTol * kSpreadGtIr[k];
        constant_detail += fmt::format(" {}={:.4f}", name, ir_c);
        spread_detail += fmt::format(" {}={:.4f}", name, ir_s);
        clipped_detail += fmt::format(" {}=({:.4f}, {:.4f})", name, ir(constant, base, 0, {true}),
                                      ir(spread, base, 0, {true}));
        ++k;
    }
    out.detail = constant_detail + "; " + spread_detail + "; " + clipped_detail;
    return out;
}

Dataset bimodal_dataset()
{
    constexpr std::size_t m = 200;
    KeyedStream stream(77, StreamRole::Truth, 0);
    std::vector<double> mu(m);
    for (std::size_t j = 0; j < m; ++j) {
        mu[j] = stream.normal(j % 2 == 0 ? 0.0 : 20.0, 0.05);
    }
    const SyntheticSpec spec{ExplicitTruth{AnswerVector(mu)}, GaussianSqSigmas{}, 20, m, 78};
    return gen_synthetic(spec);
}

Outcome partition_flip()
{
    const Dataset ds = bimodal_dataset();
    const VarianceEstimator psi = VarianceEstimator::sample_scaled(1.0);
    const double full_variance = *dispersion(*ds.ground_truth).sample_variance;
    const std::vector<QuestionBucket> buckets = partition_questions(ds, 2);
    Outcome out;
    double worst_bucket_variance = 0.0;
    for (const QuestionBucket& b : buckets) {
        worst_bucket_variance = std::max(worst_bucket_variance, *b.key_sample_variance);
    }
    out.pass = full_variance >= kBucketVarianceReduction * worst_bucket_variance;
    bool flipped = false;
    out.detail = fmt::format("GT variance {:.3f} -> max bucket {:.5f};", full_variance, worst_bucket_variance);
    for (const auto& [name, base] : all_bases()) {
        const double full = improvement_ratio(ds, base, psi, 10, 50, kIrSamples, 9, 0).ratio;
        bool all_below = true;
        std::string bucket_irs;
        for (const QuestionBucket& b : buckets) {
            const double ir = improvement_ratio(b.data, base, psi, 10, 50, kIrSamples, 9, 0).ratio;
            all_below &= ir < 1.0;
            bucket_irs += fmt::format(" {:.4f}", ir);
        }
        flipped |= full >= 1.0 && all_below;
        out.detail += fmt::format(" {}: full {:.4f} buckets{};", name, full, bucket_irs);
    }
    out.pass &= flipped;
    return out;
}

// Test-only oracle: d psi_H / d x_a_j = -2/(n(m-1)) sum_i (X_ij - x_a_j).
double psi_h_partial(const ObservationMatrix& x, const AnswerVector& x_a, std::size_t j)
{
    const double n = static_cast<double>(x.workers());
    const double m = static_cast<double>(x.questions());
    double sum = 0.0;
    for (std::size_t i = 0; i < x.workers(); ++i) {
        sum += x(i, j) - x_a[j];
    }
    return -2.0 * sum / (n * (m - 1.0));
}

double relative_error(double approx, double exact)
{
    return std::abs(approx - exact) / std::abs(exact);
}

Outcome derivatives()
{
    KeyedStream stream(99, StreamRole::Noise, 0);
    double worst = 0.0;
    for (int instance = 0; instance < 100; ++instance) {
        const std::size_t n = 2 + stream.below(6);
        const std::size_t m = 3 + stream.below(10);
        std::vector<double> values(n * m);
        for (double& v : values) {
            v = stream.normal(5.0, 3.0);
        }
        const ObservationMatrix x = validate_matrix(values, n, m);
        std::vector<double> a(m);
        for (double& v : a) {
            v = stream.normal(5.0, 3.0);
        }
        const AnswerVector x_a(a);
        const double c = 0.1 + 2.0 * static_cast<double>(stream.below(1000)) / 1000.0;
        const VarianceEstimator sample = VarianceEstimator::sample_scaled(c);
        const double mean = dispersion(x_a).mean;
        for (std::size_t j = 0; j < m; ++j) {
            const double analytic = 2.0 * c * (x_a[j] - mean) / static_cast<double>(m - 1);
            const double fd = central_difference([&](const AnswerVector& v) { return psi_s(v, c); }, x_a, j);
            worst = std::max(worst, relative_error(psi_derivative(sample, x_a, j), analytic));
            worst = std::max(worst, relative_error(fd, analytic));
            worst = std::max(worst, relative_error(psi_derivative(VarianceEstimator::heuristic(), x, x_a, j),
                                                   psi_h_partial(x, x_a, j)));
        }
    }
    Outcome out;
    out.pass = worst < kDerivativeRelTol;

    bool predicate_ok = true;
    for (int instance = 0; instance < 100; ++instance) {
        std::vector<double> a(8);
        for (double& v : a) {
            v = stream.normal(0.0, 1.0);
        }
        const AnswerVector v(a);
        const double mean = dispersion(v).mean;
        const PartialDerivative flipped = [mean](const AnswerVector& u, std::size_t j) {
            return -2.0 * (u[j] - mean) / static_cast<double>(u.size() - 1);
        };
        predicate_ok &= is_mean_adjusted(VarianceEstimator::sample_scaled(1.5), v);
        predicate_ok &= is_mean_adjusted(VarianceEstimator::constant(0.7), v);
        predicate_ok &= !is_mean_adjusted(flipped, v);
    }
    out.pass &= predicate_ok;
    out.detail = fmt::format("max rel error {:.3g}; mean-adjusted predicate {}", worst,
                             predicate_ok ? "as expected" : "wrong");
    return out;
}

Outcome determinism()
{
    const std::filesystem::path dir = std::filesystem::temp_directory_path() / "ebtd_acceptance";
    std::filesystem::create_directories(dir);
    const std::filesystem::path data = dir / "bimodal.csv";
    save_csv(bimodal_dataset(), data);

    using cli::Json;
    const std::vector<std::pair<std::string, Json>> runs{
        {"demo-table1", Json::object()},
        {"simulate",
         {{"replicates", 5000},
          {"workers", {1, 3}},
          {"questions", {5, 20}},
          {"pipelines", {"blue", "eb_blue", "blue_stein", "eb/mean/sample:1", "eb/blue/oracle:1/alpha=star"}},
          {"alpha_replicates", 2000}}},
        {"evaluate",
         {{"data", data.string()}, {"samples", 200}, {"workers", {5}}, {"questions", {20}}, {"partition", 2}}},
        {"conditions", {{"replicates", 5000}, {"workers", 3}, {"psi", "heuristic"}}},
    };
    Outcome out;
    for (const auto& [command, flags] : runs) {
        const Json config = cli::resolve_config(command, flags, std::nullopt);
        std::vector<std::string> outputs;
        for (unsigned threads : {1u, 4u, 0u, 1u}) {
            std::ostringstream stream;
            std::ostringstream err;
            const int code = cli::execute(command, config, {threads, std::nullopt}, stream, err);
            out.pass &= code == cli::kOk;
            outputs.push_back(stream.str());
        }
        const bool same = std::all_of(outputs.begin(), outputs.end(),
                                      [&](const std::string& o) { return o == outputs.front(); });
        out.pass &= same;
        out.detail += fmt::format("{}: {} bytes {}; ", command, outputs.front().size(),
                                  same ? "identical" : "DIFFER");
    }
    return out;
}

} // namespace

int main()
{
    report("1 table1-golden", table1);
    report("2 ebblue-dominance-grid", dominance);
    report("3a identity-vs-ebe-gap", identity_gap);
    report("3b constant-guess-gap", constant_guess_gap);
    report("3c sample-scaled-decomposition", decomposition_sample_scaled);
    report("4 alpha-star", alpha_star);
    report("5 synthetic-improvement-ratio", synthetic_ir);
    report("6 partition-flip", partition_flip);
    report("7 derivative-checks", derivatives);
    report("8 determinism", determinism);
    fmt::print("{} criteria failed\n", failures);
    return failures == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
