#include "ebtd/estimators.hpp"

#include "ebtd/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ebtd {

namespace {

void require_positive_variance(double sigma2, const char* what)
{
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
        throw Error(ErrorCode::NonPositiveVariance,
                    std::string(what) + " must be positive and finite, got " + std::to_string(sigma2));
    }
}

void require_nonempty(const AnswerVector& v)
{
    if (v.empty()) {
        throw Error(ErrorCode::EmptyMatrix, "answer vector is empty");
    }
}

// mean + factor * (v - mean), the common tail of every mean-centred rule.
AnswerVector shrink_toward(const AnswerVector& v, double center, double factor)
{
    if (factor == 1.0) {
        return v;
    }
    std::vector<double> out(v.size());
    for (std::size_t j = 0; j < v.size(); ++j) {
        out[j] = center + factor * (v[j] - center);
    }
    return AnswerVector(std::move(out));
}

ShrinkageResult shrink_to_mean(const AnswerVector& v, double sigma2, double alpha,
                               ShrinkageOptions options)
{
    const DispersionStats stats = dispersion(v);
    if (stats.ss == 0.0) {
        return {AnswerVector(std::vector<double>(v.size(), stats.mean)), 0.0, true};
    }
    double factor = 1.0 - alpha * sigma2 / stats.ss;
    if (options.positive_part) {
        factor = std::max(factor, 0.0);
    }
    return {shrink_toward(v, stats.mean, factor), factor, false};
}

} // namespace

ShrinkageResult ebe(const AnswerVector& v, double sigma2, ShrinkageOptions options)
{
    require_nonempty(v);
    require_positive_variance(sigma2, "sigma2");
    const std::size_t m = v.size();
    if (m <= 3) {
        return {v, 1.0, true};
    }
    return shrink_to_mean(v, sigma2, static_cast<double>(m - 3), options);
}

ShrinkageResult ebe_alpha(const AnswerVector& v, double sigma2, double alpha,
                          ShrinkageOptions options)
{
    require_nonempty(v);
    require_positive_variance(sigma2, "sigma2");
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
        throw Error(ErrorCode::InvalidArgument, "alpha must be finite and >= 0");
    }
    return shrink_to_mean(v, sigma2, alpha, options);
}

ShrinkageResult stein(const AnswerVector& v, double sigma2, ShrinkageOptions options)
{
    require_nonempty(v);
    require_positive_variance(sigma2, "sigma2");
    const std::size_t m = v.size();
    if (m <= 2) {
        return {v, 1.0, true};
    }
    double norm2 = 0.0;
    for (double x : v) {
        norm2 += x * x;
    }
    if (norm2 == 0.0) {
        throw Error(ErrorCode::ZeroNormInput, "Stein shrinkage of the zero vector is undefined");
    }
    double factor = 1.0 - static_cast<double>(m - 2) * sigma2 / norm2;
    if (options.positive_part) {
        factor = std::max(factor, 0.0);
    }
    std::vector<double> out(m);
    for (std::size_t j = 0; j < m; ++j) {
        out[j] = factor * v[j];
    }
    return {AnswerVector(std::move(out)), factor, false};
}

AnswerVector bayes_posterior_mean(const AnswerVector& v, double sigma2, double mu0,
                                  double sigma0_2)
{
    require_positive_variance(sigma2, "sigma2");
    require_positive_variance(sigma0_2, "prior variance");
    const double total = sigma0_2 + sigma2;
    const double data_weight = sigma0_2 / total;
    const double prior_weight = sigma2 / total;
    std::vector<double> out(v.size());
    for (std::size_t j = 0; j < v.size(); ++j) {
        out[j] = v[j] * data_weight + mu0 * prior_weight;
    }
    return AnswerVector(std::move(out));
}

} // namespace ebtd
