#pragma once

// Pluggable variance estimators (psi) for the estimated-competence pipeline:
// given the raw responses and an aggregate x_a they return the variance
// sigma_hat^2 that the shrinkage step treats as the aggregate's noise level.
//
// Derivatives are taken with respect to the aggregate x_a with the raw matrix
// held fixed. For the heuristic estimator that is the only dependence that the
// single-aggregate risk decomposition can see; reports built on it label the
// approximation.

#include "ebtd/core_model.hpp"

#include <functional>
#include <string>
#include <variant>

namespace ebtd {

// Average of per-worker residual variances around the aggregate.
struct HeuristicPsi {
    friend bool operator==(const HeuristicPsi&, const HeuristicPsi&) = default;
};
// c * S^2(x_a), S^2 the (m-1)-normalized sample variance.
struct SampleScaledPsi {
    double c = 1.0;
    friend bool operator==(const SampleScaledPsi&, const SampleScaledPsi&) = default;
};
// A data-independent guess.
struct ConstantPsi {
    double c = 0.0;
    friend bool operator==(const ConstantPsi&, const ConstantPsi&) = default;
};
// Per-worker guesses treated as constants; reduces to (sum 1/g_i)^-1.
struct OracleReducedPsi {
    VarianceVector guesses;
    friend bool operator==(const OracleReducedPsi&, const OracleReducedPsi&) = default;
};

class VarianceEstimator {
public:
    using Kind = std::variant<HeuristicPsi, SampleScaledPsi, ConstantPsi, OracleReducedPsi>;

    static VarianceEstimator heuristic() { return VarianceEstimator(HeuristicPsi{}); }
    // c must be finite and >= 0 (InvalidArgument otherwise).
    static VarianceEstimator sample_scaled(double c);
    static VarianceEstimator constant(double c);
    static VarianceEstimator oracle_reduced(VarianceVector guesses);

    const Kind& kind() const noexcept { return kind_; }
    // Constant and oracle estimators ignore the data entirely.
    bool data_independent() const noexcept;
    // Short label such as "heuristic", "sample(c=1)", "constant(c=0.5)".
    std::string name() const;

    friend bool operator==(const VarianceEstimator&, const VarianceEstimator&) = default;

private:
    explicit VarianceEstimator(Kind kind) : kind_(std::move(kind)) {}
    Kind kind_;
};

// Parses "heuristic", "sample[:c]", "constant:c", "oracle:g1,g2,...".
VarianceEstimator parse_variance_estimator(const std::string& text);

/// psi_H(X, x_a) = (1/n) sum_i (1/(m-1)) sum_j (X_ij - x_a_j)^2.
/// Requires m >= 2 and x_a of length m (LengthMismatch otherwise).
double psi_h(const ObservationMatrix& x, const AnswerVector& x_a);

/// c * S^2(v); requires m >= 2.
double psi_s(const AnswerVector& v, double c);

double psi_value(const VarianceEstimator& est, const ObservationMatrix& x, const AnswerVector& x_a);

/// d psi / d x_a_j with the raw matrix fixed. Analytic for the sample-scaled,
/// constant and oracle kinds; the heuristic uses a central difference with
/// step 1e-5 * max(1, |x_a_j|).
double psi_derivative(const VarianceEstimator& est, const ObservationMatrix& x,
                      const AnswerVector& x_a, std::size_t j);

/// Same, for estimators that do not read the raw matrix. Throws
/// InvalidArgument for the heuristic.
double psi_derivative(const VarianceEstimator& est, const AnswerVector& v, std::size_t j);

/// sum_j psi'_j (v_j - mean(v)): the derivative term of the risk decomposition.
double derivative_projection(const VarianceEstimator& est, const ObservationMatrix& x,
                             const AnswerVector& x_a);

using ScalarField = std::function<double(const AnswerVector&)>;
using PartialDerivative = std::function<double(const AnswerVector&, std::size_t)>;

/// Central difference of f at v along coordinate j, step 1e-5 * max(1, |v_j|).
double central_difference(const ScalarField& f, const AnswerVector& v, std::size_t j);

inline constexpr double kMeanAdjustedTolerance = 1e-8;

/// Pointwise mean-adjustedness at v: every coordinate at or below the mean has
/// derivative <= tol and every coordinate above it has derivative >= -tol.
bool is_mean_adjusted(const PartialDerivative& derivative, const AnswerVector& v,
                      double tol = kMeanAdjustedTolerance);
bool is_mean_adjusted(const VarianceEstimator& est, const ObservationMatrix& x,
                      const AnswerVector& v);
bool is_mean_adjusted(const VarianceEstimator& est, const AnswerVector& v);

} // namespace ebtd
