#pragma once

// Losses, paired Monte Carlo risk, the Improvement Ratio and numeric checks of
// the shrinkage-gain conditions and risk identities.

#include "ebtd/core_model.hpp"
#include "ebtd/experiments.hpp"
#include "ebtd/monte_carlo.hpp"
#include "ebtd/pipelines.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ebtd {

enum class LossConvention { SumSquared, MeanSquared };

std::string_view to_string(LossConvention convention);
// "sum" or "mean".
LossConvention parse_loss_convention(std::string_view text);

/// ||estimate - mu||^2, divided by m for MeanSquared. Throws LengthMismatch.
double loss(const AnswerVector& estimate, const AnswerVector& mu,
            LossConvention convention = LossConvention::SumSquared);

struct RiskReport {
    std::string name;
    double mean_loss = 0.0;
    double std_error = 0.0;
    std::size_t replicates = 0;
    std::uint64_t seed = 0;
    LossConvention loss_convention = LossConvention::SumSquared;
};

struct MonteCarloConfig {
    std::size_t replicates = 100000;
    // 0 = hardware concurrency.
    unsigned threads = 0;
    LossConvention loss = LossConvention::SumSquared;
};

// Several pipelines evaluated on the same replicate datasets.
struct PairedRisk {
    std::vector<RiskReport> reports;
    // Column k holds pipeline k's per-replicate losses.
    ReplicateTable losses{0, 0};

    // Mean and standard error of loss_i - loss_j over replicates.
    Summary difference(std::size_t i, std::size_t j) const;
};

/// Runs every pipeline on each replicate of the synthetic spec and scores it
/// against that replicate's ground truth. Blue bases without variances use the
/// replicate's true worker variances. Requires replicates >= 2.
PairedRisk mc_risk(const SyntheticSpec& spec, TruthMode mode, std::span<const PipelineSpec> pipelines,
                   const MonteCarloConfig& config);
RiskReport mc_risk(const SyntheticSpec& spec, TruthMode mode, const PipelineSpec& pipeline,
                   const MonteCarloConfig& config);

// Aggregates with `base`, filling a variance-less Blue from the dataset's true
// worker variances.
AnswerVector run_base(const TdAlgorithm& base, const Dataset& ds);

struct ImprovementRatio {
    double ratio = 1.0;
    Summary base_risk;
    Summary eb_risk;
    std::size_t samples = 0;
};

/// IR = mean L(Eb^{A,psi}) / mean L(A) over `samples` datasets drawn from the
/// source, each scored against its ground truth. Throws NoGroundTruth, and
/// InsufficientSignal when the base risk is zero.
ImprovementRatio improvement_ratio(const ReplicateSource& source, const TdAlgorithm& base,
                                   const VarianceEstimator& psi, std::size_t samples, unsigned threads,
                                   LossConvention convention = LossConvention::SumSquared,
                                   ShrinkageOptions options = {});

/// Same over uniform n x m subsamples of one dataset, sample s keyed by
/// derive_seed(seed, s). Throws InsufficientData when n or m is too large.
ImprovementRatio improvement_ratio(const Dataset& ds, const TdAlgorithm& base, const VarianceEstimator& psi,
                                   std::size_t n, std::size_t m, std::size_t samples, std::uint64_t seed,
                                   unsigned threads, LossConvention convention = LossConvention::SumSquared,
                                   ShrinkageOptions options = {});

// Replicates of one aggregate under a fixed ground truth, with everything the
// condition checks need.
struct ConditionStream {
    AnswerVector mu;
    VarianceEstimator psi = VarianceEstimator::constant(0.0);
    // Per-coordinate variance of the aggregate when the base makes it known
    // (Blue, Mean on fixed worker variances).
    std::optional<double> aggregate_variance;
    std::vector<AggregateDraw> draws;
    // Sum-squared losses of the base and of EBE(x_a, psi).
    std::vector<double> loss_base;
    std::vector<double> loss_eb;
    std::uint64_t seed = 0;

    std::size_t questions() const noexcept { return mu.size(); }
};

/// Truth and worker variances are drawn once; noise is redrawn per replicate.
ConditionStream collect_condition_stream(const SyntheticSpec& spec, const TdAlgorithm& base,
                                         const VarianceEstimator& psi, std::size_t replicates,
                                         unsigned threads);

enum class Direction { Greater, Less };

struct ConditionReport {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    Direction direction = Direction::Greater;
    bool satisfied = false;
    // Standard errors of the Monte Carlo terms, in the order named by `note`.
    std::vector<double> std_errors;
    std::string note;
};

/// lhs = 2(m-3) sum_j Cov(x_j, psi (x_j - mean)/ss) - (m-3)^2 E[psi^2/ss],
/// satisfied iff lhs > 0. Requires at least 30 draws.
ConditionReport thm3_condition(const ConditionStream& stream);

struct Decomposition {
    // Paired Monte Carlo R(Eb) - R(A).
    Summary lhs;
    // Closed-form plug-in for the same gap.
    Summary rhs;
    // Summary of lhs_r - rhs_r.
    Summary difference;
    // |difference.mean| <= 3 difference.std_error.
    bool agree = false;
};

/// rhs = (m-3)^2/(m-1) (E[psi^2/S^2] - 2 s2 (E[psi/S^2] + E[D/((m-3) S^2)])),
/// S^2 = ss/(m-1), D = sum_j psi'_j (x_j - mean). Requires m > 3.
Decomposition thm4_decomposition(const ConditionStream& stream, double sigma2);

/// R(Eb) - R(A) = E[1/ss] (m-3)^2 (E[psi^2] - 2 s2 E[psi]) for psi independent of
/// the aggregate; with psi = s2 this is the identity-versus-EBE gap
/// -s2^2 (m-3)^2 E[1/ss]. Throws InvalidArgument for a data-dependent psi.
Decomposition independent_estimator_gap(const ConditionStream& stream, double sigma2);

// Properties of psi the caller vouches for; checked only by the bracket rules.
struct DeclaredBounds {
    // |psi - s2| < epsilon with probability 1.
    std::optional<double> epsilon;
    // Pr(psi < s2) >= delta.
    std::optional<double> delta;
    // psi < bound with probability 1.
    std::optional<double> bound;
};

/// Ratio conditions for a shrinkage gain with Monte Carlo plug-ins:
///   general            E[psi^2/S^2] / (E[psi/S^2] + E[D/((m-3)S^2)]) < 2 s2
///   mean_adjusted      E[psi^2/S^2] / E[psi/S^2] < 2 s2
///   constant           E[psi^2] / E[psi] < 2 s2
/// plus the epsilon bracket and the (epsilon, delta, B) bracket when declared.
std::vector<ConditionReport> corollary_conditions(const ConditionStream& stream, double sigma2,
                                                  const DeclaredBounds& bounds = {});

/// Per-coordinate identity-minus-posterior-mean risk, s2^2 / (s0_2 + s2).
/// Throws NonPositiveVariance.
double bayes_risk_gap(double sigma2, double sigma0_2);

/// Replaces a StarAlpha rule with FixedAlpha(alpha*) estimated on a fixed-truth
/// stream of the pipeline's base and estimator. Other rules pass through.
/// Known-variance sources use the BLUE variance as a constant estimator.
PipelineSpec resolve_alpha_star(const PipelineSpec& pipeline, const SyntheticSpec& spec,
                                std::size_t replicates, unsigned threads);

} // namespace ebtd
