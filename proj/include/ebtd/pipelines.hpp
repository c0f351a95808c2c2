#pragma once

// Two-stage estimation: aggregate with a truth-discovery algorithm, then
// shrink the aggregate toward its own mean.
//
//   eb_blue  known worker variances: BLUE, then EBE with the BLUE variance.
//   eb_wrap  any algorithm A and variance estimator psi: EBE(A(X), psi).

#include "ebtd/core_model.hpp"
#include "ebtd/estimators.hpp"
#include "ebtd/td_baselines.hpp"
#include "ebtd/variance_estimators.hpp"

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace ebtd {

AnswerVector eb_blue(const ObservationMatrix& x, const VarianceVector& variances,
                     ShrinkageOptions options = {});

/// x_a = A(X); s2 = psi(X, x_a); returns ebe(x_a, s2). s2 == 0 returns x_a.
AnswerVector eb_wrap(const ObservationMatrix& x, const TdAlgorithm& base, const VarianceEstimator& psi,
                     ShrinkageOptions options = {});

/// eb_wrap with the (m-3) factor replaced by alpha.
AnswerVector eb_wrap_alpha(const ObservationMatrix& x, const TdAlgorithm& base,
                           const VarianceEstimator& psi, double alpha, ShrinkageOptions options = {});

// One Monte Carlo draw of the aggregate and its estimated variance.
struct AggregateDraw {
    AnswerVector x_a;
    double sigma_hat2 = 0.0;
    // sum_j dpsi/dx_j (x_j - mean(x)), zero for data-independent psi.
    double derivative_term = 0.0;
};

// Replicate-level moments behind the shrinkage gain, with
// y_j = s2 (x_j - mean) / ss:
//   covariance     sum_j Cov(x_j, y_j), sample covariance over draws
//   second_moment  E[s2^2 / ss]
// `per_draw_covariance[r]` is draw r's contribution, so its average equals
// `covariance` and its spread gives a standard error.
struct ShrinkageMoments {
    double covariance = 0.0;
    double second_moment = 0.0;
    std::vector<double> per_draw_covariance;
    std::vector<double> per_draw_second_moment;
};

/// Needs at least 2 draws sharing one ground truth and question count.
/// Throws InsufficientSignal on a draw with zero spread.
ShrinkageMoments shrinkage_moments(std::span<const AggregateDraw> draws);

/// Plug-in risk-minimizing alpha, covariance / second_moment of the moments
/// above. Throws InsufficientReplicates below 30 draws and InsufficientSignal
/// when the denominator vanishes.
double estimate_alpha_star(std::span<const AggregateDraw> draws);

// Variances for the shrinkage step come either from known worker variances
// (BLUE base only) or from an estimator.
struct KnownVariances {
    // Empty: use the dataset's true worker variances at run time.
    std::optional<VarianceVector> variances;
};
using VarianceSource = std::variant<KnownVariances, VarianceEstimator>;

struct DefaultAlpha {};
struct FixedAlpha {
    double value = 0.0;
};
// Must be resolved to FixedAlpha (resolve_alpha_star in analysis) before use.
struct StarAlpha {};
using AlphaRule = std::variant<DefaultAlpha, FixedAlpha, StarAlpha>;

enum class Modifier { None, EmpiricalBayes, Stein };

struct PipelineSpec {
    std::string label;
    TdAlgorithm base;
    VarianceSource variance = KnownVariances{};
    AlphaRule alpha = DefaultAlpha{};
    Modifier modifier = Modifier::EmpiricalBayes;
    ShrinkageOptions shrink;

    // Throws InvalidArgument on a known-variance source with a non-BLUE base.
    void validate() const;
};

/// Runs a pipeline; `true_variances` fills BLUE bases and known sources that
/// carry no variances of their own.
AnswerVector run_pipeline(const PipelineSpec& spec, const ObservationMatrix& x,
                          const std::optional<VarianceVector>& true_variances = std::nullopt);

// Convenience specs used by the CLI and the benchmarks.
PipelineSpec blue_pipeline();           // BLUE, no modifier
PipelineSpec eb_blue_pipeline();        // BLUE + EBE with the BLUE variance
PipelineSpec blue_stein_pipeline();     // BLUE + Stein with the BLUE variance
PipelineSpec base_pipeline(TdAlgorithm base);
PipelineSpec eb_wrap_pipeline(TdAlgorithm base, VarianceEstimator psi, ShrinkageOptions options = {});

} // namespace ebtd
