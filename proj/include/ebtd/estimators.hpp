#pragma once

// Single-vector estimators applied to one (possibly aggregated) worker's
// answers: identity, empirical Bayes shrinkage toward the sample mean, its
// generalized-alpha form, Stein shrinkage toward the origin, and the normal
// prior posterior mean used as a Bayes-risk oracle.

#include "ebtd/core_model.hpp"

namespace ebtd {

struct ShrinkageOptions {
    // Clip the bracket weight at 0 (positive-part rule). Off by default so the
    // estimator is exactly the one the risk identities are stated for.
    bool positive_part = false;
};

struct ShrinkageResult {
    AnswerVector estimate;
    // The weight multiplying (x - center); may be negative unless clipped.
    double shrink_factor = 1.0;
    // True when the formula was undefined and a fallback was returned
    // (m <= 3 -> identity, ss == 0 -> the shared mean).
    bool degenerate = false;
};

/// Empirical Bayes estimator:
///   est = mean + [1 - (m-3) sigma2 / ss] (v - mean),  ss = sum (v_j - mean)^2.
/// m <= 3 returns v unchanged and ss == 0 returns the mean vector, both flagged
/// degenerate. Throws NonPositiveVariance when sigma2 <= 0.
ShrinkageResult ebe(const AnswerVector& v, double sigma2, ShrinkageOptions options = {});

/// ebe with (m-3) replaced by alpha >= 0. alpha == m-3 is bit-identical to ebe
/// for m > 3. Only ss == 0 is degenerate here; small m is allowed since alpha
/// is explicit.
ShrinkageResult ebe_alpha(const AnswerVector& v, double sigma2, double alpha,
                          ShrinkageOptions options = {});

/// Stein shrinkage toward the origin: [1 - (m-2) sigma2 / |v|^2] v.
/// Throws ZeroNormInput when |v| == 0 and m > 2.
ShrinkageResult stein(const AnswerVector& v, double sigma2, ShrinkageOptions options = {});

inline AnswerVector identity(const AnswerVector& v) { return v; }

/// Posterior mean under mu_j ~ N(mu0, sigma0_2) and v_j | mu_j ~ N(mu_j, sigma2).
AnswerVector bayes_posterior_mean(const AnswerVector& v, double sigma2, double mu0,
                                  double sigma0_2);

} // namespace ebtd
