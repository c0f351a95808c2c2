#pragma once

// Unbiased truth-discovery algorithms that map an n x m response matrix to one
// answer per question. These are the black boxes the shrinkage pipelines wrap.

#include "ebtd/core_model.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <variant>

namespace ebtd {

// Inverse-variance weighted mean. When no variances are stored, the pipelines
// fill them from the dataset's known worker variances (synthetic data).
struct BlueTd {
    std::optional<VarianceVector> variances;
};
struct MeanTd {};
struct MedianTd {};
// Iteratively reweighted mean, w_i = -log(d_i / sum d).
struct CrhTd {};
// Iteratively reweighted mean, w_i = chi2_quantile(confidence, m) / d_i.
struct CatdTd {
    double confidence = 0.975;
};
// Single pass, w_i = 1 / mean squared distance to the other workers.
struct DistanceWeightedTd {};
// Answers computed elsewhere, returned verbatim.
struct ExternalTd {
    AnswerVector answers;
};

struct TdAlgorithm {
    using Kind = std::variant<BlueTd, MeanTd, MedianTd, CrhTd, CatdTd, DistanceWeightedTd, ExternalTd>;

    Kind kind = MeanTd{};
    int max_iterations = 14;
    // On the largest change of any normalized worker weight.
    double convergence_tol = 1e-8;

    std::string name() const;
};

// Parses "blue", "mean", "median", "crh", "catd", "distance".
TdAlgorithm parse_td_algorithm(const std::string& text);

struct BlueResult {
    AnswerVector answers;
    // (sum 1/sigma_i^2)^-1, the variance of each aggregated answer.
    double aggregated_variance = 0.0;
};

/// Per question, (sum 1/s_i)^-1 sum X_ij / s_i. Throws LengthMismatch when the
/// variance count differs from the worker count.
BlueResult blue_aggregate(const ObservationMatrix& x, const VarianceVector& variances);

/// Runs the algorithm. Blue without stored variances throws InvalidArgument;
/// a non-finite weight throws IterationDivergence.
AnswerVector run_td(const TdAlgorithm& alg, const ObservationMatrix& x);

// Residual regularizer added to every squared distance before weighting.
inline constexpr double kDistanceEpsilon = 1e-12;

/// Reads a one-column CSV with header `answer`.
AnswerVector load_external_answers(const std::filesystem::path& path);

} // namespace ebtd
