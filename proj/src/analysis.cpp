#include "ebtd/analysis.hpp"

#include "ebtd/error.hpp"
#include "ebtd/random.hpp"

#include <fmt/format.h>

#include <cmath>
#include <limits>

namespace ebtd {

namespace {

constexpr double kAgreementSe = 3.0;

AnswerVector shrink_once(const AnswerVector& x_a, double sigma2, ShrinkageOptions options)
{
    if (sigma2 == 0.0) {
        return x_a;
    }
    return ebe(x_a, sigma2, options).estimate;
}

const AnswerVector& require_truth(const Dataset& ds)
{
    if (!ds.ground_truth) {
        throw Error(ErrorCode::NoGroundTruth, "risk needs a ground truth row");
    }
    return *ds.ground_truth;
}

Decomposition compare(std::vector<double> lhs, std::vector<double> rhs)
{
    Decomposition d;
    d.lhs = summarize(lhs);
    d.rhs = summarize(rhs);
    d.difference = summarize_difference(lhs, rhs);
    d.agree = std::abs(d.difference.mean) <= kAgreementSe * d.difference.std_error;
    return d;
}

ConditionReport ratio_condition(std::string name, double numerator, double numerator_se, double denominator,
                                double denominator_se, double sigma2, std::string note)
{
    ConditionReport report;
    report.name = std::move(name);
    report.direction = Direction::Less;
    report.rhs = 2.0 * sigma2;
    // A nonpositive denominator leaves no room for a gain.
    report.lhs = denominator > 0.0 ? numerator / denominator : std::numeric_limits<double>::infinity();
    report.satisfied = report.lhs < report.rhs;
    report.std_errors = {numerator_se, denominator_se};
    report.note = std::move(note);
    return report;
}

} // namespace

std::string_view to_string(LossConvention convention)
{
    return convention == LossConvention::SumSquared ? "sum" : "mean";
}

LossConvention parse_loss_convention(std::string_view text)
{
    if (text == "sum") {
        return LossConvention::SumSquared;
    }
    if (text == "mean") {
        return LossConvention::MeanSquared;
    }
    throw Error(ErrorCode::InvalidArgument, fmt::format("unknown loss convention '{}'", text));
}

double loss(const AnswerVector& estimate, const AnswerVector& mu, LossConvention convention)
{
    if (estimate.size() != mu.size()) {
        throw Error(ErrorCode::LengthMismatch,
                    fmt::format("estimate has {} entries, truth has {}", estimate.size(), mu.size()));
    }
    std::vector<double> sq(mu.size());
    for (std::size_t j = 0; j < mu.size(); ++j) {
        const double d = estimate[j] - mu[j];
        sq[j] = d * d;
    }
    const double total = pairwise_sum(sq);
    if (convention == LossConvention::MeanSquared && !mu.empty()) {
        return total / static_cast<double>(mu.size());
    }
    return total;
}

Summary PairedRisk::difference(std::size_t i, std::size_t j) const
{
    return summarize_difference(losses.column(i), losses.column(j));
}

PairedRisk mc_risk(const SyntheticSpec& spec, TruthMode mode, std::span<const PipelineSpec> pipelines,
                   const MonteCarloConfig& config)
{
    if (config.replicates < 2) {
        throw Error(ErrorCode::InsufficientReplicates, "risk needs at least 2 replicates");
    }
    for (const PipelineSpec& p : pipelines) {
        p.validate();
        if (std::holds_alternative<StarAlpha>(p.alpha)) {
            throw Error(ErrorCode::InvalidArgument,
                        fmt::format("pipeline '{}' has an unresolved alpha*", p.label));
        }
    }
    const ReplicateSource source = synthetic_replicates(spec, mode);
    PairedRisk out;
    out.losses = run_replicates(config.replicates, pipelines.size(), config.threads,
                                [&](std::size_t r, std::span<double> row) {
                                    const Dataset ds = source(r);
                                    const AnswerVector& mu = require_truth(ds);
                                    for (std::size_t k = 0; k < pipelines.size(); ++k) {
                                        const AnswerVector est =
                                            run_pipeline(pipelines[k], ds.matrix, ds.worker_variances);
                                        row[k] = loss(est, mu, config.loss);
                                    }
                                });
    for (std::size_t k = 0; k < pipelines.size(); ++k) {
        const Summary s = summarize(out.losses.column(k));
        out.reports.push_back(
            {pipelines[k].label, s.mean, s.std_error, config.replicates, spec.seed, config.loss});
    }
    return out;
}

RiskReport mc_risk(const SyntheticSpec& spec, TruthMode mode, const PipelineSpec& pipeline,
                   const MonteCarloConfig& config)
{
    return mc_risk(spec, mode, std::span<const PipelineSpec>(&pipeline, 1), config).reports.front();
}

AnswerVector run_base(const TdAlgorithm& base, const Dataset& ds)
{
    const auto* blue = std::get_if<BlueTd>(&base.kind);
    if (blue && !blue->variances) {
        if (!ds.worker_variances) {
            throw Error(ErrorCode::InvalidArgument, "BLUE needs worker variances and the dataset has none");
        }
        return blue_aggregate(ds.matrix, *ds.worker_variances).answers;
    }
    return run_td(base, ds.matrix);
}

ImprovementRatio improvement_ratio(const ReplicateSource& source, const TdAlgorithm& base,
                                   const VarianceEstimator& psi, std::size_t samples, unsigned threads,
                                   LossConvention convention, ShrinkageOptions options)
{
    if (samples == 0) {
        throw Error(ErrorCode::InsufficientReplicates, "improvement ratio needs at least one sample");
    }
    const ReplicateTable table =
        run_replicates(samples, 2, threads, [&](std::size_t s, std::span<double> row) {
            const Dataset ds = source(s);
            const AnswerVector& mu = require_truth(ds);
            const AnswerVector x_a = run_base(base, ds);
            const AnswerVector eb = shrink_once(x_a, psi_value(psi, ds.matrix, x_a), options);
            row[0] = loss(x_a, mu, convention);
            row[1] = loss(eb, mu, convention);
        });
    ImprovementRatio ir;
    ir.samples = samples;
    ir.base_risk = summarize(table.column(0));
    ir.eb_risk = summarize(table.column(1));
    if (!(ir.base_risk.mean > 0.0)) {
        throw Error(ErrorCode::InsufficientSignal, "base risk is zero; the ratio is undefined");
    }
    ir.ratio = ir.eb_risk.mean / ir.base_risk.mean;
    return ir;
}

ImprovementRatio improvement_ratio(const Dataset& ds, const TdAlgorithm& base, const VarianceEstimator& psi,
                                   std::size_t n, std::size_t m, std::size_t samples, std::uint64_t seed,
                                   unsigned threads, LossConvention convention, ShrinkageOptions options)
{
    require_truth(ds);
    if (n == 0 || m == 0 || n > ds.matrix.workers() || m > ds.matrix.questions()) {
        throw Error(ErrorCode::InsufficientData,
                    fmt::format("cannot sample {} x {} from a {} x {} dataset", n, m, ds.matrix.workers(),
                                ds.matrix.questions()));
    }
    const ReplicateSource source = [&](std::uint64_t s) { return subsample(ds, n, m, derive_seed(seed, s)); };
    return improvement_ratio(source, base, psi, samples, threads, convention, options);
}

ConditionStream collect_condition_stream(const SyntheticSpec& spec, const TdAlgorithm& base,
                                         const VarianceEstimator& psi, std::size_t replicates,
                                         unsigned threads)
{
    const ReplicateSource source = synthetic_replicates(spec, TruthMode::Fixed);
    const Dataset first = source(0);
    ConditionStream stream;
    stream.mu = require_truth(first);
    stream.psi = psi;
    stream.seed = spec.seed;

    const VarianceVector& variances = *first.worker_variances;
    const std::size_t n = variances.size();
    if (const auto* blue = std::get_if<BlueTd>(&base.kind)) {
        stream.aggregate_variance = blue_aggregate(first.matrix, blue->variances.value_or(variances))
                                        .aggregated_variance;
    } else if (std::holds_alternative<MeanTd>(base.kind)) {
        stream.aggregate_variance = pairwise_sum(variances.values()) / static_cast<double>(n * n);
    }

    const std::size_t m = stream.mu.size();
    // Columns: x_a (m), psi, derivative term, base loss, eb loss.
    const ReplicateTable table =
        run_replicates(replicates, m + 4, threads, [&](std::size_t r, std::span<double> row) {
            const Dataset ds = source(r);
            const AnswerVector x_a = run_base(base, ds);
            const double s2 = psi_value(psi, ds.matrix, x_a);
            for (std::size_t j = 0; j < m; ++j) {
                row[j] = x_a[j];
            }
            row[m] = s2;
            row[m + 1] = derivative_projection(psi, ds.matrix, x_a);
            row[m + 2] = loss(x_a, stream.mu);
            row[m + 3] = loss(shrink_once(x_a, s2, {}), stream.mu);
        });

    stream.draws.resize(replicates);
    stream.loss_base.resize(replicates);
    stream.loss_eb.resize(replicates);
    for (std::size_t r = 0; r < replicates; ++r) {
        std::vector<double> x(m);
        for (std::size_t j = 0; j < m; ++j) {
            x[j] = table.at(r, j);
        }
        stream.draws[r] = {AnswerVector(std::move(x)), table.at(r, m), table.at(r, m + 1)};
        stream.loss_base[r] = table.at(r, m + 2);
        stream.loss_eb[r] = table.at(r, m + 3);
    }
    return stream;
}

ConditionReport thm3_condition(const ConditionStream& stream)
{
    if (stream.draws.size() < 30) {
        throw Error(ErrorCode::InsufficientReplicates,
                    fmt::format("condition needs at least 30 replicates, got {}", stream.draws.size()));
    }
    const double a = static_cast<double>(stream.questions()) - 3.0;
    const ShrinkageMoments moments = shrinkage_moments(stream.draws);
    std::vector<double> per_draw(stream.draws.size());
    for (std::size_t r = 0; r < per_draw.size(); ++r) {
        per_draw[r] = 2.0 * a * moments.per_draw_covariance[r] - a * a * moments.per_draw_second_moment[r];
    }
    ConditionReport report;
    report.name = "gain_iff";
    report.lhs = 2.0 * a * moments.covariance - a * a * moments.second_moment;
    report.rhs = 0.0;
    report.direction = Direction::Greater;
    report.satisfied = report.lhs > report.rhs;
    report.std_errors = {summarize(per_draw).std_error};
    report.note = "se of lhs";
    return report;
}

namespace {

struct ScaledMoments {
    // Per draw: psi^2/S^2, psi/S^2, D/((m-3) S^2).
    std::vector<double> psi2;
    std::vector<double> psi1;
    std::vector<double> deriv;
};

ScaledMoments scaled_moments(const ConditionStream& stream)
{
    const std::size_t m = stream.questions();
    if (m <= 3) {
        throw Error(ErrorCode::InvalidArgument, "the risk decomposition needs m > 3");
    }
    const std::size_t r = stream.draws.size();
    ScaledMoments out;
    out.psi2.resize(r);
    out.psi1.resize(r);
    out.deriv.resize(r);
    for (std::size_t k = 0; k < r; ++k) {
        const AggregateDraw& d = stream.draws[k];
        const double s2 = *dispersion(d.x_a).sample_variance;
        if (s2 == 0.0) {
            throw Error(ErrorCode::InsufficientSignal, "a draw has zero spread around its mean");
        }
        out.psi2[k] = d.sigma_hat2 * d.sigma_hat2 / s2;
        out.psi1[k] = d.sigma_hat2 / s2;
        out.deriv[k] = d.derivative_term / ((static_cast<double>(m) - 3.0) * s2);
    }
    return out;
}

std::vector<double> paired_gap(const ConditionStream& stream)
{
    std::vector<double> gap(stream.loss_eb.size());
    for (std::size_t r = 0; r < gap.size(); ++r) {
        gap[r] = stream.loss_eb[r] - stream.loss_base[r];
    }
    return gap;
}

} // namespace

Decomposition thm4_decomposition(const ConditionStream& stream, double sigma2)
{
    const ScaledMoments sm = scaled_moments(stream);
    const double a = static_cast<double>(stream.questions()) - 3.0;
    const double prefactor = a * a / (static_cast<double>(stream.questions()) - 1.0);
    std::vector<double> rhs(sm.psi2.size());
    for (std::size_t r = 0; r < rhs.size(); ++r) {
        rhs[r] = prefactor * (sm.psi2[r] - 2.0 * sigma2 * (sm.psi1[r] + sm.deriv[r]));
    }
    return compare(paired_gap(stream), std::move(rhs));
}

Decomposition independent_estimator_gap(const ConditionStream& stream, double sigma2)
{
    if (!stream.psi.data_independent()) {
        throw Error(ErrorCode::InvalidArgument,
                    fmt::format("'{}' depends on the data; use thm4_decomposition", stream.psi.name()));
    }
    const double a = static_cast<double>(stream.questions()) - 3.0;
    std::vector<double> rhs(stream.draws.size());
    for (std::size_t r = 0; r < rhs.size(); ++r) {
        const AggregateDraw& d = stream.draws[r];
        const double ss = dispersion(d.x_a).ss;
        rhs[r] = a * a * (d.sigma_hat2 * d.sigma_hat2 - 2.0 * sigma2 * d.sigma_hat2) / ss;
    }
    return compare(paired_gap(stream), std::move(rhs));
}

std::vector<ConditionReport> corollary_conditions(const ConditionStream& stream, double sigma2,
                                                  const DeclaredBounds& bounds)
{
    const ScaledMoments sm = scaled_moments(stream);
    const Summary psi2 = summarize(sm.psi2);
    const Summary psi1 = summarize(sm.psi1);
    std::vector<double> with_deriv(sm.psi1.size());
    for (std::size_t r = 0; r < with_deriv.size(); ++r) {
        with_deriv[r] = sm.psi1[r] + sm.deriv[r];
    }
    const Summary general_den = summarize(with_deriv);

    std::vector<double> raw2(stream.draws.size());
    std::vector<double> raw1(stream.draws.size());
    for (std::size_t r = 0; r < raw1.size(); ++r) {
        raw1[r] = stream.draws[r].sigma_hat2;
        raw2[r] = raw1[r] * raw1[r];
    }
    const Summary m2 = summarize(raw2);
    const Summary m1 = summarize(raw1);

    std::vector<ConditionReport> out;
    out.push_back(ratio_condition("general", psi2.mean, psi2.std_error, general_den.mean,
                                  general_den.std_error, sigma2, "se of numerator, denominator"));
    ConditionReport adjusted = ratio_condition("mean_adjusted", psi2.mean, psi2.std_error, psi1.mean,
                                               psi1.std_error, sigma2, "se of numerator, denominator");
    if (!stream.psi.data_independent() && !std::holds_alternative<SampleScaledPsi>(stream.psi.kind())) {
        adjusted.note += "; psi not known to be mean-adjusted";
    }
    out.push_back(std::move(adjusted));
    ConditionReport constant =
        ratio_condition("constant", m2.mean, m2.std_error, m1.mean, m1.std_error, sigma2,
                        "se of numerator, denominator");
    if (!stream.psi.data_independent()) {
        constant.note += "; psi depends on the data";
    }
    out.push_back(std::move(constant));

    if (bounds.epsilon) {
        ConditionReport report;
        report.name = "epsilon_bracket";
        report.lhs = *bounds.epsilon;
        report.rhs = sigma2;
        report.direction = Direction::Less;
        report.satisfied = report.lhs > 0.0 && report.lhs < report.rhs;
        report.note = "declared epsilon in (0, s2)";
        out.push_back(std::move(report));
    }
    if (bounds.epsilon && bounds.delta && bounds.bound) {
        const double eps = *bounds.epsilon;
        const double delta = *bounds.delta;
        const double b = *bounds.bound;
        const double s4 = sigma2 * sigma2;
        const bool delta_ok = delta > 0.0 && delta < 1.0;
        const bool bound_ok = delta_ok && b < delta * s4 / (1.0 - delta);
        const double radicand = delta_ok ? 5.0 * s4 + b * (1.0 - 1.0 / delta) : -1.0;
        ConditionReport report;
        report.name = "epsilon_delta_bracket";
        report.lhs = eps;
        report.rhs = radicand >= 0.0 ? -2.0 * sigma2 + std::sqrt(radicand)
                                     : std::numeric_limits<double>::quiet_NaN();
        report.direction = Direction::Less;
        report.satisfied = bound_ok && eps > 0.0 && eps < report.rhs;
        report.note = bound_ok ? "declared B < delta s2^2/(1-delta)" : "declared B violates B < delta s2^2/(1-delta)";
        out.push_back(std::move(report));
    }
    return out;
}

double bayes_risk_gap(double sigma2, double sigma0_2)
{
    if (!(sigma2 > 0.0) || !(sigma0_2 > 0.0)) {
        throw Error(ErrorCode::NonPositiveVariance, "variances must be positive");
    }
    return sigma2 * sigma2 / (sigma0_2 + sigma2);
}

PipelineSpec resolve_alpha_star(const PipelineSpec& pipeline, const SyntheticSpec& spec,
                                std::size_t replicates, unsigned threads)
{
    if (!std::holds_alternative<StarAlpha>(pipeline.alpha)) {
        return pipeline;
    }
    pipeline.validate();
    VarianceEstimator psi = VarianceEstimator::constant(0.0);
    if (const auto* est = std::get_if<VarianceEstimator>(&pipeline.variance)) {
        psi = *est;
    } else {
        const auto& blue = std::get<BlueTd>(pipeline.base.kind);
        const auto& known = std::get<KnownVariances>(pipeline.variance);
        const Dataset ds = gen_synthetic(spec);
        const VarianceVector& v = blue.variances ? *blue.variances
                                  : known.variances ? *known.variances
                                                    : *ds.worker_variances;
        psi = VarianceEstimator::oracle_reduced(v);
    }
    const ConditionStream stream = collect_condition_stream(spec, pipeline.base, psi, replicates, threads);
    PipelineSpec resolved = pipeline;
    resolved.alpha = FixedAlpha{estimate_alpha_star(stream.draws)};
    return resolved;
}

} // namespace ebtd
