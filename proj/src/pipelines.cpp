#include "ebtd/pipelines.hpp"

#include "ebtd/detail/overloaded.hpp"
#include "ebtd/error.hpp"

#include <fmt/format.h>

#include <cmath>

namespace ebtd {

namespace {

using detail::overloaded;

AnswerVector shrink(const AnswerVector& x_a, double sigma2, const AlphaRule& alpha, ShrinkageOptions options)
{
    if (sigma2 == 0.0) {
        return x_a;
    }
    return std::visit(overloaded{
                          [&](const DefaultAlpha&) { return ebe(x_a, sigma2, options).estimate; },
                          [&](const FixedAlpha& a) { return ebe_alpha(x_a, sigma2, a.value, options).estimate; },
                          [](const StarAlpha&) -> AnswerVector {
                              throw Error(ErrorCode::InvalidArgument,
                                          "alpha* must be estimated on synthetic replicates before running");
                          },
                      },
                      alpha);
}

const VarianceVector& pick_variances(const std::optional<VarianceVector>& own,
                                     const std::optional<VarianceVector>& fallback)
{
    if (own) {
        return *own;
    }
    if (fallback) {
        return *fallback;
    }
    throw Error(ErrorCode::InvalidArgument, "known worker variances are required but none were given");
}

} // namespace

AnswerVector eb_blue(const ObservationMatrix& x, const VarianceVector& variances, ShrinkageOptions options)
{
    const BlueResult blue = blue_aggregate(x, variances);
    return ebe(blue.answers, blue.aggregated_variance, options).estimate;
}

AnswerVector eb_wrap(const ObservationMatrix& x, const TdAlgorithm& base, const VarianceEstimator& psi,
                     ShrinkageOptions options)
{
    const AnswerVector x_a = run_td(base, x);
    return shrink(x_a, psi_value(psi, x, x_a), DefaultAlpha{}, options);
}

AnswerVector eb_wrap_alpha(const ObservationMatrix& x, const TdAlgorithm& base,
                           const VarianceEstimator& psi, double alpha, ShrinkageOptions options)
{
    const AnswerVector x_a = run_td(base, x);
    return shrink(x_a, psi_value(psi, x, x_a), FixedAlpha{alpha}, options);
}

ShrinkageMoments shrinkage_moments(std::span<const AggregateDraw> draws)
{
    const std::size_t r = draws.size();
    if (r < 2) {
        throw Error(ErrorCode::InsufficientReplicates,
                    fmt::format("moments need at least 2 replicates, got {}", r));
    }
    const std::size_t m = draws.front().x_a.size();
    // Row-major r x m buffers of x_j and y_j.
    std::vector<double> xs(r * m);
    std::vector<double> ys(r * m);
    ShrinkageMoments out;
    out.per_draw_second_moment.resize(r);
    for (std::size_t k = 0; k < r; ++k) {
        const AggregateDraw& d = draws[k];
        if (d.x_a.size() != m) {
            throw Error(ErrorCode::LengthMismatch, "draws have different question counts");
        }
        const DispersionStats stats = dispersion(d.x_a);
        if (stats.ss == 0.0) {
            throw Error(ErrorCode::InsufficientSignal, "a draw has zero spread around its mean");
        }
        for (std::size_t j = 0; j < m; ++j) {
            xs[k * m + j] = d.x_a[j];
            ys[k * m + j] = d.sigma_hat2 * (d.x_a[j] - stats.mean) / stats.ss;
        }
        out.per_draw_second_moment[k] = d.sigma_hat2 * d.sigma_hat2 / stats.ss;
    }

    std::vector<double> mean_x(m);
    std::vector<double> mean_y(m);
    std::vector<double> column(r);
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t k = 0; k < r; ++k) {
            column[k] = xs[k * m + j];
        }
        mean_x[j] = pairwise_sum(column) / static_cast<double>(r);
        for (std::size_t k = 0; k < r; ++k) {
            column[k] = ys[k * m + j];
        }
        mean_y[j] = pairwise_sum(column) / static_cast<double>(r);
    }

    const double bessel = static_cast<double>(r) / static_cast<double>(r - 1);
    out.per_draw_covariance.resize(r);
    std::vector<double> terms(m);
    for (std::size_t k = 0; k < r; ++k) {
        for (std::size_t j = 0; j < m; ++j) {
            terms[j] = (xs[k * m + j] - mean_x[j]) * (ys[k * m + j] - mean_y[j]);
        }
        out.per_draw_covariance[k] = bessel * pairwise_sum(terms);
    }
    out.covariance = pairwise_sum(out.per_draw_covariance) / static_cast<double>(r);
    out.second_moment = pairwise_sum(out.per_draw_second_moment) / static_cast<double>(r);
    return out;
}

double estimate_alpha_star(std::span<const AggregateDraw> draws)
{
    if (draws.size() < 30) {
        throw Error(ErrorCode::InsufficientReplicates,
                    fmt::format("alpha* needs at least 30 replicates, got {}", draws.size()));
    }
    const ShrinkageMoments moments = shrinkage_moments(draws);
    if (!(moments.second_moment > 0.0)) {
        throw Error(ErrorCode::InsufficientSignal, "E[s2^2 / ss] is zero; alpha* is undefined");
    }
    return moments.covariance / moments.second_moment;
}

void PipelineSpec::validate() const
{
    if (std::holds_alternative<KnownVariances>(variance) && modifier != Modifier::None &&
        !std::holds_alternative<BlueTd>(base.kind)) {
        throw Error(ErrorCode::InvalidArgument,
                    "known variances define the aggregate's variance only for a BLUE base");
    }
}

AnswerVector run_pipeline(const PipelineSpec& spec, const ObservationMatrix& x,
                          const std::optional<VarianceVector>& true_variances)
{
    spec.validate();
    AnswerVector x_a;
    double known_sigma2 = 0.0;
    if (const auto* blue = std::get_if<BlueTd>(&spec.base.kind)) {
        const auto* known = std::get_if<KnownVariances>(&spec.variance);
        const std::optional<VarianceVector>& stated =
            blue->variances ? blue->variances : (known ? known->variances : blue->variances);
        BlueResult aggregated = blue_aggregate(x, pick_variances(stated, true_variances));
        x_a = std::move(aggregated.answers);
        known_sigma2 = aggregated.aggregated_variance;
    } else {
        x_a = run_td(spec.base, x);
    }
    if (spec.modifier == Modifier::None) {
        return x_a;
    }
    const double sigma2 = std::visit(overloaded{
                                         [&](const KnownVariances&) { return known_sigma2; },
                                         [&](const VarianceEstimator& psi) { return psi_value(psi, x, x_a); },
                                     },
                                     spec.variance);
    if (spec.modifier == Modifier::Stein) {
        return sigma2 == 0.0 ? x_a : stein(x_a, sigma2, spec.shrink).estimate;
    }
    return shrink(x_a, sigma2, spec.alpha, spec.shrink);
}

PipelineSpec blue_pipeline()
{
    return {"blue", TdAlgorithm{BlueTd{}}, KnownVariances{}, DefaultAlpha{}, Modifier::None, {}};
}

PipelineSpec eb_blue_pipeline()
{
    return {"eb_blue", TdAlgorithm{BlueTd{}}, KnownVariances{}, DefaultAlpha{}, Modifier::EmpiricalBayes, {}};
}

PipelineSpec blue_stein_pipeline()
{
    return {"blue_stein", TdAlgorithm{BlueTd{}}, KnownVariances{}, DefaultAlpha{}, Modifier::Stein, {}};
}

PipelineSpec base_pipeline(TdAlgorithm base)
{
    std::string label = base.name();
    return {std::move(label), std::move(base), KnownVariances{}, DefaultAlpha{}, Modifier::None, {}};
}

PipelineSpec eb_wrap_pipeline(TdAlgorithm base, VarianceEstimator psi, ShrinkageOptions options)
{
    std::string label = "eb_" + base.name() + "_" + psi.name();
    return {std::move(label), std::move(base), std::move(psi), DefaultAlpha{}, Modifier::EmpiricalBayes, options};
}

} // namespace ebtd
